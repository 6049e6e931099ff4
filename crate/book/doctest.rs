// The book's code listings run as doctests: each chapter becomes the doc
// comment of an empty module, so `cargo test -p hcie-book` checks them and a
// failure points at the chapter it came from.

#[doc = include_str!("src/intro.md")]
pub mod intro {}
#[doc = include_str!("src/ring.md")]
pub mod ring {}
#[doc = include_str!("src/tensor_keys.md")]
pub mod tensor_keys {}
#[doc = include_str!("src/hill.md")]
pub mod hill {}
#[doc = include_str!("src/attack.md")]
pub mod attack {}
#[doc = include_str!("src/rsa.md")]
pub mod rsa {}
#[doc = include_str!("src/envelope.md")]
pub mod envelope {}
#[doc = include_str!("src/transfer.md")]
pub mod transfer {}
#[doc = include_str!("src/bench.md")]
pub mod bench {}
