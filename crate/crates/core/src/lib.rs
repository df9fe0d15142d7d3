//! Touch emulation for two-site 3D video calls.
//!
//! Each site renders its participant as an image-based portrait from the remote
//! viewer's eye position and ships it together with the tracked hand skeleton.
//! The receiver rigs a mesh hand to that skeleton and recolors it to match the
//! portrait. The mesh fades in as the hand approaches the shared screen. Both
//! sites detect mutual touches on the screen plane and fire a haptic pulse.

pub mod appearance;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod lumigraph;
pub mod raster;
pub mod render;
pub mod skeleton_rig;
pub mod session;
pub mod spatial_calib;
pub mod touch;

pub use error::{Error, Result};
pub use geometry::{Camera, Intrinsics, Plane, Rigid};
pub use raster::{LayerImage, Mask, RasterDump, RgbImage};
pub use skeleton_rig::{BoneScales, HandSkeleton, RiggedHandMesh};
pub use spatial_calib::{ScreenGeometry, SiteTransform, Viewpoint};
pub use touch::{HapticPulse, TouchEvent, TouchParams};
pub use fusion::{FusionParams, HandDistance};
pub use appearance::ColorTransform;
pub use lumigraph::CaptureRig;
pub use session::{run_scenario, Scenario, SessionTrace, SiteFrameMessage, SiteId};
