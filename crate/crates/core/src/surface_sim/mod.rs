//! Synthetic chip surfaces and a diffuse + specular renderer.
//!
//! Surface coordinates: `x` along columns, `y` along rows, `z` up, origin at
//! the centre of the grid. Heights are stored in micrometres, light and
//! camera positions in millimetres.

mod layout;
mod noise;
mod render;
mod surface;
mod video;

pub use layout::{inject_edge_glare, EdgeGlare, GlareField, TextLine, TextMarking};
pub use noise::add_capture_noise;
pub use render::{
    render_point_light, render_scanner_pass, CameraPose, LightKind, LightPose, ReflectionParams,
    ScanDirection, SurfaceGeometry, DEFAULT_SCANNER_SAMPLES,
};
pub use surface::{generate_surface, normals_from_height, HeightMap, RoughnessSpectrum};
pub use video::{render_video, Frame, LightTrajectory, LightWaypoint, VideoClip};
