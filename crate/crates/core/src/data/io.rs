//! Binary dataset container.
//!
//! Layout (little-endian): magic, `u32` version, `u32` header length, JSON
//! header with the generation spec and lexicon, then for each of train, dev
//! and test a `u64` item count followed by items. An item is `u32` class,
//! `u32` character count, the `u32` character ids, `u32` frames, `u32`
//! features and the frames as row-major `f64`.

use super::dataset::{Dataset, DatasetSpec, Item};
use super::lexicon::Lexicon;
use super::DataError;
use crate::encoders::{CharSequence, FeatureSequence};
use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const DATASET_MAGIC: &[u8; 8] = b"AWESYNTH";
pub const DATASET_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    spec: DatasetSpec,
    lexicon: Lexicon,
}

pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<(), DataError> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write_dataset(&mut w, ds)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_dataset<W: Write>(w: &mut W, ds: &Dataset) -> Result<(), DataError> {
    w.write_all(DATASET_MAGIC)?;
    w.write_u32::<LE>(DATASET_VERSION)?;
    let header = serde_json::to_vec(&Header {
        spec: ds.spec.clone(),
        lexicon: ds.lexicon.clone(),
    })
    .map_err(|e| DataError::Format(e.to_string()))?;
    w.write_u32::<LE>(header.len() as u32)?;
    w.write_all(&header)?;
    for items in [&ds.train, &ds.dev, &ds.test] {
        w.write_u64::<LE>(items.len() as u64)?;
        for item in items {
            w.write_u32::<LE>(item.class as u32)?;
            w.write_u32::<LE>(item.chars.len() as u32)?;
            for &c in item.chars.chars() {
                w.write_u32::<LE>(c)?;
            }
            let frames = item.features.frames();
            w.write_u32::<LE>(frames.nrows() as u32)?;
            w.write_u32::<LE>(frames.ncols() as u32)?;
            for &v in frames.iter() {
                w.write_f64::<LE>(v)?;
            }
        }
    }
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    let mut r = BufReader::new(File::open(path)?);
    read_dataset(&mut r).map_err(|e| match e {
        DataError::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            DataError::Format("truncated file".into())
        }
        other => other,
    })
}

fn read_dataset<R: Read>(r: &mut R) -> Result<Dataset, DataError> {
    let fmt = |m: String| DataError::Format(m);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DATASET_MAGIC {
        return Err(fmt("bad magic".into()));
    }
    let version = r.read_u32::<LE>()?;
    if version != DATASET_VERSION {
        return Err(fmt(format!("unsupported version {version}")));
    }
    let len = r.read_u32::<LE>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    let header: Header = serde_json::from_slice(&buf).map_err(|e| fmt(e.to_string()))?;
    let alphabet = header.lexicon.alphabet_size;
    let num_classes = header.lexicon.len();
    let feature_dim = header.spec.feature_dim;

    let mut splits: Vec<Vec<Item>> = Vec::with_capacity(3);
    for _ in 0..3 {
        let count = r.read_u64::<LE>()?;
        let mut items = Vec::new();
        for _ in 0..count {
            let class = r.read_u32::<LE>()? as usize;
            if class >= num_classes {
                return Err(fmt(format!("class {class} outside lexicon")));
            }
            let n = r.read_u32::<LE>()? as usize;
            let mut chars = vec![0u32; n];
            r.read_u32_into::<LE>(&mut chars)?;
            let chars = CharSequence::new(chars, alphabet).map_err(|e| fmt(e.to_string()))?;
            let t = r.read_u32::<LE>()? as usize;
            let f = r.read_u32::<LE>()? as usize;
            if f != feature_dim {
                return Err(fmt(format!("frame width {f}, expected {feature_dim}")));
            }
            let mut values = vec![0.0; t * f];
            r.read_f64_into::<LE>(&mut values)?;
            let frames = Array2::from_shape_vec((t, f), values).map_err(|e| fmt(e.to_string()))?;
            let features = FeatureSequence::new(frames).map_err(|e| fmt(e.to_string()))?;
            items.push(Item {
                features,
                chars,
                class,
            });
        }
        splits.push(items);
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(fmt("trailing bytes".into()));
    }
    let test = splits.pop().expect("three splits");
    let dev = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");
    Ok(Dataset {
        spec: header.spec,
        lexicon: header.lexicon,
        train,
        dev,
        test,
    })
}
