pub mod codec;
pub mod color_correction;
pub mod container;
pub mod control_prior;
pub mod frame_io;
pub mod generation;
pub mod keyframe_selection;
pub mod metrics;
pub mod pipeline;
pub mod segmentation;
pub mod sweep;
pub mod synth;
