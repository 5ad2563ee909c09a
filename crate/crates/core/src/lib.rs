//! Composite imitation learning for multi-UAV obstacle avoidance.
//!
//! The crate bundles a planar multi-UAV arena ([`sim`]), a ray-cast
//! perception sensor ([`sense`]), a small dense network stack with exact
//! gradients ([`neural`]), PPO machinery ([`ppo`]), behavior cloning and a
//! GAIL discriminator ([`imitation`]), expert demonstrations ([`demos`]) and
//! the composite training / evaluation loop ([`train`]).

pub mod demos;
pub mod geometry;
pub mod imitation;
pub mod neural;
pub mod ppo;
pub mod sense;
pub mod sim;
pub mod train;
