//! Global-shutter outputs: undistorted features, warped images, depth and
//! rendering for translational motion.

pub mod dense;
pub mod features;
pub mod raster;
pub mod triangulate;
pub mod warp;

pub use dense::{
    build_depth_maps, build_occlusion_masks, filter_flow, fuse_depths, render_gs_translation, FlowFilterConfig,
    RenderFlag, Rendered,
};
pub use features::{undistort_correspondence, undistort_features, undistort_point_rotation};
pub use raster::{psnr, DepthMap, FlowField, OcclusionMask, Raster, Source};
pub use triangulate::{rowpair_rays, triangulate_rowpair, Ray};
pub use warp::{distort_image_rotation, fuse_warped, orient_second, warp_image_rotation, Camera, WarpDirection};
