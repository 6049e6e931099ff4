//! Hybrid file encryption: a Hill-style matrix cipher over `Z/2^m` whose
//! keys are tensor products of small invertible matrices, with the session
//! seed wrapped under textbook RSA and the plaintext signed over SHA-256.
//!
//! ```
//! use hcie::envelope::{seal, Envelope};
//! use hcie::rsa::{keygen, KeyProfile};
//! use rand::SeedableRng;
//!
//! let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
//! let (alice_pub, alice) = keygen(512, KeyProfile::Standard, &mut rng).unwrap();
//! let (bob_pub, bob) = keygen(512, KeyProfile::Standard, &mut rng).unwrap();
//!
//! let env = seal(b"quarterly figures", &bob_pub, &alice, &alice_pub, &mut rng, 4).unwrap();
//! let wire = env.serialize();
//! let opened = Envelope::parse(&wire).unwrap().open(&bob, &alice_pub).unwrap();
//! assert_eq!(opened, b"quarterly figures");
//! ```

pub mod bench;
pub mod envelope;
pub mod hill;
pub mod ring;
pub mod rsa;
pub mod sha256;
pub mod transfer;

pub use envelope::{seal, Envelope};
pub use hill::{derive_key, HillKey, SessionSeed};
pub use ring::{Block, RingMatrix, RingParams};
pub use rsa::{RsaPrivateKey, RsaPublicKey, Signature};
