//! Stand-in devices for exercising campaigns without hardware.

mod behavior;
mod server;

pub use behavior::{
    edit_distance, parse_mock_config, render_mock_config, tplink_reply_plain, Device, FaultSchedule, MockBehavior,
    MockConfigError, Reply, RouteMatcher, D3D_AUTH, RTSP_PUBLIC, SET_OK_BODY, TINY_JPEG,
};
pub use server::{serve, serve_on, ServerHandle};
