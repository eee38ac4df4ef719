use std::ops::Range;

use super::AutodiffError;

/// Name of the segment holding the trainable wave speed.
pub const SPEED: &str = "speed";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub range: Range<usize>,
}

/// Flat trainable vector partitioned into named, contiguous segments.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    data: Vec<f64>,
    segments: Vec<Segment>,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self { data: Vec::new(), segments: Vec::new() }
    }

    /// Appends a zero-filled segment and returns its span.
    pub fn push_segment(&mut self, name: &str, len: usize) -> Result<Range<usize>, AutodiffError> {
        if self.segments.iter().any(|s| s.name == name) {
            return Err(AutodiffError::DuplicateSegment(name.to_string()));
        }
        if name == SPEED && len != 1 {
            return Err(AutodiffError::SpeedSlot(len));
        }
        let start = self.data.len();
        self.data.resize(start + len, 0.0);
        self.segments.push(Segment { name: name.to_string(), range: start..start + len });
        Ok(start..start + len)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        self.segments.iter().find(|s| s.name == name).map(|s| s.range.clone())
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.range(name).map(|r| &self.data[r])
    }

    pub fn segment_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        self.range(name).map(move |r| &mut self.data[r])
    }

    /// Segment that owns flat index `i`.
    pub fn owner(&self, i: usize) -> Option<&str> {
        self.segments.iter().find(|s| s.range.contains(&i)).map(|s| s.name.as_str())
    }

    pub fn speed_index(&self) -> Option<usize> {
        self.range(SPEED).map(|r| r.start)
    }

    pub fn speed(&self) -> f64 {
        self.speed_index().map(|i| self.data[i]).unwrap_or(0.0)
    }

    pub fn set_speed(&mut self, s: f64) {
        if let Some(i) = self.speed_index() {
            self.data[i] = s;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Replaces the flat data, keeping the layout.
    pub fn set_data(&mut self, data: &[f64]) -> Result<(), AutodiffError> {
        if data.len() != self.data.len() {
            return Err(AutodiffError::LengthMismatch { expected: self.data.len(), got: data.len() });
        }
        self.data.copy_from_slice(data);
        Ok(())
    }

    /// Same layout, different values.
    pub fn with_data(&self, data: &[f64]) -> Result<Self, AutodiffError> {
        let mut out = self.clone();
        out.set_data(data)?;
        Ok(out)
    }
}
