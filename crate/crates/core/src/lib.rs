//! Automatic ship berthing with proximal policy optimization.
//!
//! The crate is organized bottom-up:
//!
//! - [`dynamics`]: a deterministic 3-DOF (surge, sway, yaw) maneuvering model
//!   with propeller thrust, rudder forces and actuator limits.
//! - [`env`]: the berthing decision process built on top of it (observation,
//!   reward, initial-state sampling, episode control, trajectory logs).
//! - [`nn`]: dense and LSTM layers with hand-written reverse-mode gradients
//!   and an Adam optimizer over a flat [`nn::ParamStore`].
//! - [`agent`]: the shared-trunk recurrent actor-critic and its squashed
//!   Gaussian action distribution.
//! - [`ppo`]: rollout buffers, GAE, the clipped surrogate and the training loop.
//! - [`harness`]: run configuration, checkpoints, evaluation and SVG plots
//!   used by the `berth` command-line tool.
//!
//! Batch work (minibatch gradients, multi-worker rollouts, evaluation over
//! many start positions) goes through [`par::Execution`], which uses rayon
//! when the `parallel` feature is enabled and runs sequentially otherwise.
//! Results are identical in both modes.

pub mod agent;
pub mod dynamics;
pub mod env;
pub mod harness;
pub mod nn;
pub mod par;
pub mod ppo;
