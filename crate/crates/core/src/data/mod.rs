//! Synthetic gesture frames, PGM I/O and the template classifier.

mod glyph;
mod oracle;
mod pgm;

pub use glyph::{centroid_quartile, synth_gesture_image, DrParams, GestureClass, Quartile, Range, MAX_CLASSES};
pub use oracle::{resample, OracleClassifier, Prediction, ORACLE_TEMPERATURE};
pub use pgm::{decode_pgm, encode_pgm, load_dataset_dir, quantize8, read_pgm, write_pgm, LabeledImage};
