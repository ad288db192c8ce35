//! Volume and labelmap data model, the SEGV binary container, region algebra
//! and synthetic phantoms.
//!
//! SEGV layout (little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SEGV"
//! 4       2     version (u16, = 1)
//! 6       1     dtype code (0 = f32, 1 = u8)
//! 7       1     reserved (= 0)
//! 8       16    dims c, z, y, x (4 x u32)
//! 24      12    spacing z, y, x in mm (3 x f32)
//! 36      ...   payload, row-major with x fastest
//! ```

use std::fs;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng;

pub const MAGIC: &[u8; 4] = b"SEGV";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 36;

/// BraTS label values.
pub const LABEL_BACKGROUND: u8 = 0;
pub const LABEL_NET: u8 = 1;
pub const LABEL_EDEMA: u8 = 2;
pub const LABEL_ET: u8 = 4;

pub type Dims3 = [usize; 3];

pub fn voxel_count(dims: Dims3) -> usize {
    dims[0] * dims[1] * dims[2]
}

#[inline]
pub fn flat_index(dims: Dims3, z: usize, y: usize, x: usize) -> usize {
    (z * dims[1] + y) * dims[2] + x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DType {
    F32 = 0,
    U8 = 1,
}

impl DType {
    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DType::F32),
            1 => Ok(DType::U8),
            other => Err(Error::format("dtype_code", format!("unknown code {other}"))),
        }
    }

    fn byte_width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeHeader {
    /// (channels, z, y, x)
    pub dims: [usize; 4],
    /// (z, y, x) in millimetres
    pub spacing_mm: [f32; 3],
    pub dtype: DType,
}

impl VolumeHeader {
    pub fn new(dims: [usize; 4], spacing_mm: [f32; 3], dtype: DType) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::format(
                "dims",
                format!("all dims must be >= 1, got {dims:?}"),
            ));
        }
        if dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::format("dims", "dimension exceeds u32"));
        }
        if spacing_mm.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::format(
                "spacing",
                format!("spacings must be positive, got {spacing_mm:?}"),
            ));
        }
        Ok(VolumeHeader {
            dims,
            spacing_mm,
            dtype,
        })
    }

    pub fn channels(&self) -> usize {
        self.dims[0]
    }

    pub fn spatial(&self) -> Dims3 {
        [self.dims[1], self.dims[2], self.dims[3]]
    }

    pub fn element_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn spacing_f64(&self) -> [f64; 3] {
        self.spacing_mm.map(f64::from)
    }
}

/// Multi-channel intensity volume (T1, T1Gd, T2, FLAIR for the reference data).
#[derive(Debug, Clone, PartialEq)]
pub struct Volume4D {
    header: VolumeHeader,
    data: Vec<f32>,
}

impl Volume4D {
    pub fn new(dims: [usize; 4], spacing_mm: [f32; 3], data: Vec<f32>) -> Result<Self> {
        let header = VolumeHeader::new(dims, spacing_mm, DType::F32)?;
        if data.len() != header.element_count() {
            return Err(Error::Shape(format!(
                "volume data has {} values, dims {:?} need {}",
                data.len(),
                dims,
                header.element_count()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("volume value at index {i}")));
        }
        Ok(Volume4D { header, data })
    }

    pub fn zeros(dims: [usize; 4], spacing_mm: [f32; 3]) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, spacing_mm, vec![0.0; n])
    }

    pub fn header(&self) -> &VolumeHeader {
        &self.header
    }

    pub fn channels(&self) -> usize {
        self.header.channels()
    }

    pub fn spatial(&self) -> Dims3 {
        self.header.spatial()
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.header.spacing_mm
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = voxel_count(self.spatial());
        &self.data[c * n..(c + 1) * n]
    }

    /// Mutable channel access. Callers must keep values finite.
    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let n = voxel_count(self.spatial());
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, z: usize, y: usize, x: usize) -> f32 {
        self.channel(c)[flat_index(self.spatial(), z, y, x)]
    }

    /// Rebuild with new channel data of identical shape.
    pub fn with_data(&self, data: Vec<f32>) -> Result<Self> {
        Self::new(self.header.dims, self.header.spacing_mm, data)
    }
}

/// Integer labelmap over {0, 1, 2, 4}.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    header: VolumeHeader,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(dims: Dims3, spacing_mm: [f32; 3], labels: Vec<u8>) -> Result<Self> {
        let header = VolumeHeader::new([1, dims[0], dims[1], dims[2]], spacing_mm, DType::U8)?;
        if labels.len() != voxel_count(dims) {
            return Err(Error::Shape(format!(
                "labelmap has {} voxels, dims {:?} need {}",
                labels.len(),
                dims,
                voxel_count(dims)
            )));
        }
        if let Some((i, &v)) = labels.iter().enumerate().find(|(_, &v)| !is_valid_label(v)) {
            return Err(Error::format(
                "labels",
                format!("label value {v} at voxel {i} is not in {{0,1,2,4}}"),
            ));
        }
        Ok(LabelMap { header, labels })
    }

    pub fn zeros(dims: Dims3, spacing_mm: [f32; 3]) -> Result<Self> {
        Self::new(dims, spacing_mm, vec![0; voxel_count(dims)])
    }

    pub fn header(&self) -> &VolumeHeader {
        &self.header
    }

    pub fn spatial(&self) -> Dims3 {
        self.header.spatial()
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.header.spacing_mm
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, z: usize, y: usize, x: usize) -> u8 {
        self.labels[flat_index(self.spatial(), z, y, x)]
    }

    pub fn count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

pub fn is_valid_label(v: u8) -> bool {
    matches!(v, 0 | 1 | 2 | 4)
}

/// Either payload kind a SEGV file can hold.
#[derive(Debug, Clone, PartialEq)]
pub enum SegVol {
    Image(Volume4D),
    Labels(LabelMap),
}

impl SegVol {
    pub fn into_image(self) -> Result<Volume4D> {
        match self {
            SegVol::Image(v) => Ok(v),
            SegVol::Labels(_) => Err(Error::format("dtype_code", "expected an F32 image volume")),
        }
    }

    pub fn into_labels(self) -> Result<LabelMap> {
        match self {
            SegVol::Labels(l) => Ok(l),
            SegVol::Image(_) => Err(Error::format("dtype_code", "expected a U8 labelmap")),
        }
    }
}

impl From<Volume4D> for SegVol {
    fn from(v: Volume4D) -> Self {
        SegVol::Image(v)
    }
}

impl From<LabelMap> for SegVol {
    fn from(l: LabelMap) -> Self {
        SegVol::Labels(l)
    }
}

fn encode_header(h: &VolumeHeader, out: &mut Vec<u8>) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(h.dtype as u8);
    out.push(0);
    for d in h.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for s in h.spacing_mm {
        out.extend_from_slice(&s.to_le_bytes());
    }
}

/// Serialize to SEGV bytes.
pub fn encode_segvol(v: &SegVol) -> Vec<u8> {
    match v {
        SegVol::Image(img) => {
            let mut out = Vec::with_capacity(HEADER_LEN + img.data.len() * 4);
            encode_header(&img.header, &mut out);
            for x in &img.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
            out
        }
        SegVol::Labels(lm) => {
            let mut out = Vec::with_capacity(HEADER_LEN + lm.labels.len());
            encode_header(&lm.header, &mut out);
            out.extend_from_slice(&lm.labels);
            out
        }
    }
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

/// Parse SEGV bytes.
pub fn decode_segvol(bytes: &[u8]) -> Result<SegVol> {
    if bytes.len() < 4 || &bytes[0..4] != MAGIC {
        return Err(Error::format("magic", "missing SEGV magic bytes"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            "header",
            format!("truncated header: {} of {HEADER_LEN} bytes", bytes.len()),
        ));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::format(
            "version",
            format!("unsupported version {version}"),
        ));
    }
    let dtype = DType::from_code(bytes[6])?;
    if bytes[7] != 0 {
        return Err(Error::format(
            "reserved",
            format!("expected 0, found {}", bytes[7]),
        ));
    }
    let mut dims = [0usize; 4];
    for (i, d) in dims.iter_mut().enumerate() {
        *d = le_u32(&bytes[8 + 4 * i..]) as usize;
    }
    let mut spacing = [0f32; 3];
    for (i, s) in spacing.iter_mut().enumerate() {
        *s = f32::from_bits(le_u32(&bytes[24 + 4 * i..]));
    }
    let header = VolumeHeader::new(dims, spacing, dtype)?;
    let expected = header
        .element_count()
        .checked_mul(dtype.byte_width())
        .ok_or_else(|| Error::format("dims", "payload size overflows"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::format(
            "payload",
            format!("truncated payload: {} of {expected} bytes", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            "payload",
            format!("{} trailing bytes after payload", payload.len() - expected),
        ));
    }
    match dtype {
        DType::F32 => {
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            Volume4D::new(dims, spacing, data)
                .map(SegVol::Image)
                .map_err(|e| match e {
                    Error::NonFinite(msg) => Error::format("payload", msg),
                    other => other,
                })
        }
        DType::U8 => {
            if dims[0] != 1 {
                return Err(Error::format(
                    "dims",
                    format!("labelmap must have 1 channel, found {}", dims[0]),
                ));
            }
            LabelMap::new([dims[1], dims[2], dims[3]], spacing, payload.to_vec())
                .map(SegVol::Labels)
        }
    }
}

pub fn read_segvol(path: impl AsRef<Path>) -> Result<SegVol> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_segvol(&bytes)
}

pub fn write_segvol(v: &SegVol, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_segvol(v)).map_err(|e| Error::io(path, e))
}

/// The three evaluated tumor regions, in network channel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Region {
    #[serde(rename = "ET")]
    Et,
    #[serde(rename = "TC")]
    Tc,
    #[serde(rename = "WT")]
    Wt,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Et, Region::Tc, Region::Wt];

    pub fn channel(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Et => "ET",
            Region::Tc => "TC",
            Region::Wt => "WT",
        }
    }
}

/// Binary ET/TC/WT masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMasks {
    pub dims: Dims3,
    pub et: Vec<bool>,
    pub tc: Vec<bool>,
    pub wt: Vec<bool>,
}

impl RegionMasks {
    pub fn new(dims: Dims3, et: Vec<bool>, tc: Vec<bool>, wt: Vec<bool>) -> Result<Self> {
        let n = voxel_count(dims);
        if et.len() != n || tc.len() != n || wt.len() != n {
            return Err(Error::Shape(format!(
                "region masks must each have {n} voxels (got {}, {}, {})",
                et.len(),
                tc.len(),
                wt.len()
            )));
        }
        Ok(RegionMasks { dims, et, tc, wt })
    }

    pub fn get(&self, r: Region) -> &[bool] {
        match r {
            Region::Et => &self.et,
            Region::Tc => &self.tc,
            Region::Wt => &self.wt,
        }
    }

    /// True when et ⊆ tc ⊆ wt voxelwise.
    pub fn is_nested(&self) -> bool {
        self.et
            .iter()
            .zip(&self.tc)
            .zip(&self.wt)
            .all(|((&e, &t), &w)| (!e || t) && (!t || w))
    }
}

/// Per-region probabilities in [0, 1], not necessarily nested.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionProbs {
    pub dims: Dims3,
    pub et: Vec<f64>,
    pub tc: Vec<f64>,
    pub wt: Vec<f64>,
}

impl RegionProbs {
    pub fn new(dims: Dims3, et: Vec<f64>, tc: Vec<f64>, wt: Vec<f64>) -> Result<Self> {
        let n = voxel_count(dims);
        if et.len() != n || tc.len() != n || wt.len() != n {
            return Err(Error::Shape(format!(
                "region probabilities must each have {n} voxels"
            )));
        }
        if et
            .iter()
            .chain(&tc)
            .chain(&wt)
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(Error::InvalidArgument(
                "probabilities must lie in [0,1]".into(),
            ));
        }
        Ok(RegionProbs { dims, et, tc, wt })
    }

    pub fn get(&self, r: Region) -> &[f64] {
        match r {
            Region::Et => &self.et,
            Region::Tc => &self.tc,
            Region::Wt => &self.wt,
        }
    }
}

pub fn labelmap_to_regions(lm: &LabelMap) -> RegionMasks {
    let labels = lm.labels();
    RegionMasks {
        dims: lm.spatial(),
        et: labels.iter().map(|&l| l == LABEL_ET).collect(),
        tc: labels
            .iter()
            .map(|&l| l == LABEL_ET || l == LABEL_NET)
            .collect(),
        wt: labels.iter().map(|&l| l != LABEL_BACKGROUND).collect(),
    }
}

/// Rebuild labels from region masks: ET wins, then TC minus ET is NET, then
/// WT minus TC is edema.
pub fn regions_to_labelmap(m: &RegionMasks, spacing_mm: [f32; 3]) -> Result<LabelMap> {
    let n = voxel_count(m.dims);
    if m.et.len() != n || m.tc.len() != n || m.wt.len() != n {
        return Err(Error::Shape("region masks do not match their dims".into()));
    }
    let labels = (0..n)
        .map(|i| {
            if m.et[i] {
                LABEL_ET
            } else if m.tc[i] {
                LABEL_NET
            } else if m.wt[i] {
                LABEL_EDEMA
            } else {
                LABEL_BACKGROUND
            }
        })
        .collect();
    LabelMap::new(m.dims, spacing_mm, labels)
}

/// Per-region mean intensities for (T1, T1Gd, T2, FLAIR).
const PHANTOM_MEANS: [[f32; 4]; 4] = [
    // healthy brain
    [0.60, 0.50, 0.40, 0.40],
    // NET / necrotic core
    [0.30, 0.30, 0.90, 0.60],
    // edema
    [0.50, 0.45, 0.80, 1.00],
    // enhancing tumor
    [0.50, 1.20, 0.65, 0.70],
];
pub const PHANTOM_NOISE_SIGMA: f32 = 0.05;
pub const PHANTOM_MIN_DIM: usize = 16;

/// Synthetic four-channel case with nested ellipsoidal tumor regions.
///
/// The brain is an ellipsoid centred in the volume; outside it every channel is
/// exactly 0. The tumor is an edema ellipsoid containing a core whose outer
/// shell is enhancing and whose centre is necrotic.
pub fn generate_phantom(seed: u64, dims: Dims3) -> Result<(Volume4D, LabelMap)> {
    if dims.iter().any(|&d| d < PHANTOM_MIN_DIM) {
        return Err(Error::InvalidArgument(format!(
            "phantom dims must be >= {PHANTOM_MIN_DIM}, got {dims:?}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let fd = dims.map(|d| d as f64);
    let centre = fd.map(|d| (d - 1.0) / 2.0);
    let brain_r: [f64; 3] = std::array::from_fn(|a| fd[a] * rng.gen_range(0.38..0.44));
    let min_dim = fd.iter().cloned().fold(f64::INFINITY, f64::min);
    let wt_scale = min_dim * rng.gen_range(0.18..0.23);
    let wt_r: [f64; 3] = std::array::from_fn(|_| wt_scale * rng.gen_range(0.85..1.15));
    // keep the whole tumor inside the brain
    let tumor_c: [f64; 3] = std::array::from_fn(|a| {
        let slack = (brain_r[a] - wt_r[a] - 1.5).max(0.0) * 0.5;
        centre[a] + rng.gen_range(-slack..=slack)
    });
    let tc_frac = rng.gen_range(0.55..0.65);
    let core_frac = rng.gen_range(0.45..0.55);

    let inside = |p: [f64; 3], c: [f64; 3], r: [f64; 3], s: f64| -> bool {
        (0..3)
            .map(|a| ((p[a] - c[a]) / (r[a] * s)).powi(2))
            .sum::<f64>()
            <= 1.0
    };

    let n = voxel_count(dims);
    let mut labels = vec![0u8; n];
    let mut region = vec![None::<usize>; n];
    for z in 0..dims[0] {
        for y in 0..dims[1] {
            for x in 0..dims[2] {
                let p = [z as f64, y as f64, x as f64];
                let i = flat_index(dims, z, y, x);
                if !inside(p, centre, brain_r, 1.0) {
                    continue;
                }
                let (label, row) = if inside(p, tumor_c, wt_r, tc_frac * core_frac) {
                    (LABEL_NET, 1)
                } else if inside(p, tumor_c, wt_r, tc_frac) {
                    (LABEL_ET, 3)
                } else if inside(p, tumor_c, wt_r, 1.0) {
                    (LABEL_EDEMA, 2)
                } else {
                    (LABEL_BACKGROUND, 0)
                };
                labels[i] = label;
                region[i] = Some(row);
            }
        }
    }

    let noise = Normal::new(0.0f32, PHANTOM_NOISE_SIGMA).expect("valid sigma");
    let mut data = vec![0f32; 4 * n];
    for c in 0..4 {
        for (i, r) in region.iter().enumerate() {
            if let Some(row) = r {
                let v = PHANTOM_MEANS[*row][c] + noise.sample(&mut rng);
                // brain voxels are never exactly zero
                data[c * n + i] = if v.abs() < 1e-3 { 1e-3 } else { v };
            }
        }
    }
    let spacing = [1.0; 3];
    Ok((
        Volume4D::new([4, dims[0], dims[1], dims[2]], spacing, data)?,
        LabelMap::new(dims, spacing, labels)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_volume_round_trip() {
        let v = Volume4D::new([1, 1, 1, 1], [1.0; 3], vec![0.5]).unwrap();
        let back = decode_segvol(&encode_segvol(&v.clone().into())).unwrap();
        assert_eq!(back, SegVol::Image(v));
    }

    #[test]
    fn zero_labelmap_payload_is_eight_zero_bytes() {
        let lm = LabelMap::zeros([2, 2, 2], [1.0; 3]).unwrap();
        let bytes = encode_segvol(&lm.into());
        assert_eq!(bytes.len(), HEADER_LEN + 8);
        assert!(bytes[HEADER_LEN..].iter().all(|&b| b == 0));
        assert_eq!(&bytes[0..4], b"SEGV");
        assert_eq!(bytes[6], 1);
    }

    #[test]
    fn f32_payload_length() {
        let v = Volume4D::zeros([4, 8, 8, 8], [1.0; 3]).unwrap();
        let bytes = encode_segvol(&v.into());
        assert_eq!(bytes.len() - HEADER_LEN, 8192);
    }

    #[test]
    fn label_violation_is_reported() {
        let lm = LabelMap::zeros([1, 1, 2], [1.0; 3]).unwrap();
        let mut bytes = encode_segvol(&lm.into());
        bytes[HEADER_LEN + 1] = 3;
        match decode_segvol(&bytes) {
            Err(Error::Format { field, .. }) => assert_eq!(field, "labels"),
            other => panic!("expected label error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_truncation() {
        let v = Volume4D::zeros([1, 2, 2, 2], [1.0; 3]).unwrap();
        let bytes = encode_segvol(&v.into());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_segvol(&bad),
            Err(Error::Format { field: "magic", .. })
        ));
        assert!(matches!(
            decode_segvol(&bytes[..bytes.len() - 1]),
            Err(Error::Format {
                field: "payload",
                ..
            })
        ));
        assert!(matches!(
            decode_segvol(&bytes[..20]),
            Err(Error::Format {
                field: "header",
                ..
            })
        ));
    }

    #[test]
    fn region_conversion_examples() {
        let lm = LabelMap::new([1, 1, 4], [1.0; 3], vec![0, 1, 2, 4]).unwrap();
        let m = labelmap_to_regions(&lm);
        assert_eq!(m.et, vec![false, false, false, true]);
        assert_eq!(m.tc, vec![false, true, false, true]);
        assert_eq!(m.wt, vec![false, true, true, true]);
        assert!(m.is_nested());
        assert_eq!(regions_to_labelmap(&m, [1.0; 3]).unwrap(), lm);
    }

    #[test]
    fn all_eight_mask_combinations() {
        // truth table: (et, tc, wt) -> label, with ET precedence
        let mut et = vec![];
        let mut tc = vec![];
        let mut wt = vec![];
        for bits in 0..8u8 {
            et.push(bits & 4 != 0);
            tc.push(bits & 2 != 0);
            wt.push(bits & 1 != 0);
        }
        let m = RegionMasks::new([1, 1, 8], et, tc, wt).unwrap();
        let lm = regions_to_labelmap(&m, [1.0; 3]).unwrap();
        assert_eq!(lm.labels(), &[0, 2, 1, 1, 4, 4, 4, 4]);
    }

    #[test]
    fn phantom_is_deterministic_and_nested() {
        let (v1, l1) = generate_phantom(1, [32, 32, 32]).unwrap();
        let (v2, l2) = generate_phantom(1, [32, 32, 32]).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(l1, l2);
        let m = labelmap_to_regions(&l1);
        assert!(m.is_nested());
        for r in Region::ALL {
            assert!(m.get(r).iter().filter(|&&b| b).count() > 0, "{r:?} empty");
        }
        let (v3, _) = generate_phantom(2, [32, 32, 32]).unwrap();
        assert_ne!(v1, v3);
    }

    #[test]
    fn phantom_background_is_exactly_zero() {
        let (v, _) = generate_phantom(3, [16, 20, 24]).unwrap();
        // corners lie outside the brain ellipsoid
        for c in 0..4 {
            assert_eq!(v.get(c, 0, 0, 0), 0.0);
            assert_eq!(v.get(c, 15, 19, 23), 0.0);
        }
        assert!(generate_phantom(3, [8, 32, 32]).is_err());
    }
}
