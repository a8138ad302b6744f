//! Secret-key establishment over a pair of independent discrete memoryless
//! broadcast channels.
//!
//! The crate is organized around five subsystems:
//!
//! * [`infotheory`]: exact finite-alphabet probability calculus (entropies,
//!   mutual informations, tensor composition, Markov-chain tests).
//! * [`channel`]: broadcast channel models, sampling, and degradedness
//!   analysis.
//! * [`bounds`]: numerical evaluation of the secret-key capacity bounds.
//! * [`typicality`]: weak typicality predicates, including the bipartite
//!   extensions, with Monte-Carlo AEP verification.
//! * [`protocol`]: the two-round key-establishment protocol at desk scale,
//!   including the eavesdropper's reconstruction decoder and security
//!   estimation.

pub mod bounds;
pub mod channel;
pub mod error;
pub mod infotheory;
pub mod protocol;
pub mod typicality;

pub use error::SkeError;
