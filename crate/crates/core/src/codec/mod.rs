//! Hybrid block codec for the pseudo-video sequence, the `LFD2` container and
//! an external-encoder adapter.

mod bits;
mod container;
pub mod dct;
mod entropy;
mod external;
mod frame;
mod sequence;

pub use bits::{BitReader, BitWriter};
pub use container::{CodecId, EncodedView, LfBitstream, StreamHeader, MAGIC, VERSION};
pub use entropy::{ResidualCoder, RunLengthExpGolomb};
pub use external::{external_encode, parse_frame_bits};
pub use frame::{check_qp, decode_view, encode_view, qstep, ViewCoder, BLOCK_SIZE, MAX_QP};
pub use sequence::{
    check_drop_set, decode_sequence, encode_sequence, sequence_for_stream, CodecConfig, DecodedSequence,
    DropFromLayer, DropSelector, EncodedSequence, GopContext, KeepAll,
};
