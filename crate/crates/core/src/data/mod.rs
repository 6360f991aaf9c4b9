//! WAV codec, stem-directory datasets, and the split manifest.

mod stems;
mod wav;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use stems::{
    load_stem_directory, load_track, load_tracks, synthesize_mixture, track_dirs, DatasetManifest, TrackStems,
    MIXTURE_TOLERANCE, MULTI_INSTRUMENT_STEMS, SINGING_VOICE_STEMS,
};
pub use wav::{decode_wav, encode_wav, quantize, read_wav, write_wav};

use crate::error::Result;

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{file_name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
