use crate::dsp::FEATURE_COUNT;
use crate::{HgrError, Result};

/// Sliding windows over one or more recordings, `W x len x 5` row-major.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowedDataset {
    pub len: usize,
    pub windows: Vec<f64>,
    /// Label of each window's last frame.
    pub labels: Vec<usize>,
    /// (recording index, window start) per window; a negative start marks
    /// left padding.
    pub provenance: Vec<(usize, isize)>,
    pub padded: bool,
}

impl WindowedDataset {
    pub fn empty(len: usize) -> Self {
        WindowedDataset { len, ..Default::default() }
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn window(&self, i: usize) -> &[f64] {
        let n = self.len * FEATURE_COUNT;
        &self.windows[i * n..(i + 1) * n]
    }

    pub fn extend(&mut self, other: &WindowedDataset) -> Result<()> {
        if other.is_empty() {
            return Ok(());
        }
        if self.len != other.len {
            return Err(HgrError::Shape(format!("window lengths {} and {} differ", self.len, other.len)));
        }
        self.windows.extend_from_slice(&other.windows);
        self.labels.extend_from_slice(&other.labels);
        self.provenance.extend_from_slice(&other.provenance);
        self.padded |= other.padded;
        Ok(())
    }

    /// Subset by window index, in the given order.
    pub fn select(&self, idx: &[usize]) -> WindowedDataset {
        let mut out = WindowedDataset::empty(self.len);
        for &i in idx {
            out.windows.extend_from_slice(self.window(i));
            out.labels.push(self.labels[i]);
            out.provenance.push(self.provenance[i]);
        }
        out.padded = self.padded;
        out
    }
}

/// Windows of one recording (`frames` is `T x 5` row-major) with stride
/// `stride`. Recordings shorter than `len` are left-padded by repeating the
/// first frame, which also sets [`WindowedDataset::padded`].
pub fn window_dataset(
    frames: &[f64],
    labels: &[usize],
    len: usize,
    stride: usize,
    recording: usize,
) -> Result<WindowedDataset> {
    let d = FEATURE_COUNT;
    if len == 0 || stride == 0 {
        return Err(HgrError::Config("window length and stride must be positive".into()));
    }
    if frames.len() % d != 0 || frames.len() / d != labels.len() {
        return Err(HgrError::Shape(format!("{} feature values for {} labels", frames.len(), labels.len())));
    }
    let t = labels.len();
    if t == 0 {
        return Err(HgrError::Shape("empty recording".into()));
    }
    let mut out = WindowedDataset::empty(len);
    if t < len {
        let pad = len - t;
        for _ in 0..pad {
            out.windows.extend_from_slice(&frames[..d]);
        }
        out.windows.extend_from_slice(frames);
        out.labels.push(labels[t - 1]);
        out.provenance.push((recording, -(pad as isize)));
        out.padded = true;
        return Ok(out);
    }
    let mut w = 0;
    while w + len <= t {
        out.windows.extend_from_slice(&frames[w * d..(w + len) * d]);
        out.labels.push(labels[w + len - 1]);
        out.provenance.push((recording, w as isize));
        w += stride;
    }
    Ok(out)
}

/// Concatenated windows of several recordings; recording indices follow
/// the slice order.
pub fn window_many(recordings: &[(Vec<f64>, Vec<usize>)], len: usize, stride: usize) -> Result<WindowedDataset> {
    let parts = crate::par::map_range(recordings.len(), |i| {
        window_dataset(&recordings[i].0, &recordings[i].1, len, stride, i)
    });
    let mut out = WindowedDataset::empty(len);
    for p in parts {
        out.extend(&p?)?;
    }
    Ok(out)
}
