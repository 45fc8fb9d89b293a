//! Dense feed-forward networks with hand-written backprop, Adam, and checkpoints.

mod adam;
mod checkpoint;
mod mlp;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, ParamBlock, FORMAT_VERSION, MAGIC};
pub use mlp::{sigmoid, Activation, Gradients, Mlp, Tape};
