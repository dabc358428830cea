//! Seam segments, their canonical yzx ordering, coordinate quantization and
//! the token-stream encoding consumed by the sequence model.
//!
//! A stream is `BOS, x_h, y_h, z_h, x_t, y_t, z_t, ..., EOS` with coordinate
//! tokens in `0..bins` and control tokens directly above them.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Vec3;

pub const DEFAULT_BINS: u32 = 1024;
pub const DEFAULT_MAX_SEGMENTS: usize = 1024;

/// Slack tolerated outside `[-1, 1]` before quantization refuses a value.
const CLAMP_SLACK: f64 = 1e-9;

/// Lexicographic comparison on `(y, z, x)`; `y` is the vertical axis.
pub fn yzx_cmp(a: &Vec3, b: &Vec3) -> Ordering {
    a[1].total_cmp(&b[1]).then(a[2].total_cmp(&b[2])).then(a[0].total_cmp(&b[0]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeamSegment {
    head: Vec3,
    tail: Vec3,
}

impl SeamSegment {
    /// Builds a segment with endpoints ordered so that `head <= tail` in yzx order.
    pub fn new(p: Vec3, q: Vec3) -> Result<Self> {
        if p == q {
            return Err(Error::Degenerate("zero-length seam segment".into()));
        }
        if p.iter().chain(q.iter()).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("seam endpoint".into()));
        }
        Ok(match yzx_cmp(&p, &q) {
            Ordering::Greater => SeamSegment { head: q, tail: p },
            _ => SeamSegment { head: p, tail: q },
        })
    }

    pub fn head(&self) -> Vec3 {
        self.head
    }

    pub fn tail(&self) -> Vec3 {
        self.tail
    }

    fn order(&self, other: &Self) -> Ordering {
        yzx_cmp(&self.head, &other.head).then(yzx_cmp(&self.tail, &other.tail))
    }
}

/// Segments in canonical order without duplicates. May be empty (for example
/// after decoding a stream whose segments all collapsed).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeamSequence {
    segments: Vec<SeamSegment>,
}

impl SeamSequence {
    pub fn segments(&self) -> &[SeamSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Applies `f` to every endpoint and re-canonicalizes (the map may reorder
    /// or collapse segments).
    pub fn map_points(&self, f: impl Fn(Vec3) -> Vec3) -> SeamSequence {
        let raw: Vec<(Vec3, Vec3)> = self.segments.iter().map(|s| (f(s.head), f(s.tail))).collect();
        canonical_sort_lenient(raw)
    }
}

fn canonical_sort_lenient(raw: Vec<(Vec3, Vec3)>) -> SeamSequence {
    let mut segments: Vec<SeamSegment> = raw.into_iter().filter_map(|(p, q)| SeamSegment::new(p, q).ok()).collect();
    segments.sort_by(|a, b| a.order(b));
    segments.dedup_by(|a, b| a.order(b) == Ordering::Equal);
    SeamSequence { segments }
}

/// Orients every segment head-first, sorts by `(head, tail)` in yzx order and
/// removes exact duplicates. Degenerate segments are discarded; an input made
/// only of degenerate segments is an error.
pub fn canonical_sort(raw: impl IntoIterator<Item = (Vec3, Vec3)>) -> Result<SeamSequence> {
    let raw: Vec<_> = raw.into_iter().collect();
    if raw.is_empty() {
        return Err(Error::Degenerate("no seam segments".into()));
    }
    let seq = canonical_sort_lenient(raw);
    if seq.is_empty() {
        return Err(Error::Degenerate("every seam segment has zero length".into()));
    }
    Ok(seq)
}

/// Quantized coordinate alphabet plus the control tokens directly above it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codec {
    pub bins: u32,
    pub max_segments: usize,
}

impl Default for Codec {
    fn default() -> Self {
        Codec { bins: DEFAULT_BINS, max_segments: DEFAULT_MAX_SEGMENTS }
    }
}

impl Codec {
    pub fn new(bins: u32, max_segments: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::Config(format!("need at least 2 bins, got {bins}")));
        }
        Ok(Codec { bins, max_segments })
    }

    pub fn bos(&self) -> u32 {
        self.bins
    }

    pub fn eos(&self) -> u32 {
        self.bins + 1
    }

    pub fn pad(&self) -> u32 {
        self.bins + 2
    }

    pub fn vocab_size(&self) -> usize {
        self.bins as usize + 3
    }

    pub fn bin_width(&self) -> f64 {
        2.0 / self.bins as f64
    }

    /// `floor((c + 1) / 2 * bins)`, clamped to the last bin.
    pub fn quantize(&self, coord: f64) -> Result<u32> {
        if !coord.is_finite() {
            return Err(Error::NonFinite(format!("coordinate {coord}")));
        }
        if !(-1.0 - CLAMP_SLACK..=1.0 + CLAMP_SLACK).contains(&coord) {
            return Err(Error::OutOfRange { value: coord, lo: -1.0, hi: 1.0 });
        }
        let c = coord.clamp(-1.0, 1.0);
        let bin = ((c + 1.0) / 2.0 * self.bins as f64).floor() as i64;
        Ok(bin.clamp(0, self.bins as i64 - 1) as u32)
    }

    /// Center of `bin`.
    pub fn dequantize(&self, bin: u32) -> Result<f64> {
        if bin >= self.bins {
            return Err(Error::OutOfRange { value: bin as f64, lo: 0.0, hi: (self.bins - 1) as f64 });
        }
        Ok(-1.0 + (bin as f64 + 0.5) * self.bin_width())
    }

    pub fn snap(&self, coord: f64) -> Result<f64> {
        self.dequantize(self.quantize(coord)?)
    }

    pub fn snap_point(&self, p: Vec3) -> Result<Vec3> {
        Ok([self.snap(p[0])?, self.snap(p[1])?, self.snap(p[2])?])
    }

    /// Snaps raw normalized segments to bin centers, then sorts them canonically.
    pub fn canonicalize(&self, raw: impl IntoIterator<Item = (Vec3, Vec3)>) -> Result<SeamSequence> {
        let snapped =
            raw.into_iter().map(|(p, q)| Ok((self.snap_point(p)?, self.snap_point(q)?))).collect::<Result<Vec<_>>>()?;
        canonical_sort(snapped)
    }

    pub fn encode(&self, seq: &SeamSequence) -> Result<TokenStream> {
        if seq.is_empty() {
            return Err(Error::Degenerate("cannot encode an empty seam".into()));
        }
        if seq.len() > self.max_segments {
            return Err(Error::SequenceTooLong { segments: seq.len(), max: self.max_segments });
        }
        let mut tokens = Vec::with_capacity(6 * seq.len() + 2);
        tokens.push(self.bos());
        for s in seq.segments() {
            for c in s.head.iter().chain(s.tail.iter()) {
                tokens.push(self.quantize(*c)?);
            }
        }
        tokens.push(self.eos());
        Ok(TokenStream { tokens })
    }

    /// Inverse of [`Codec::encode`]. Trailing padding after `EOS` is accepted;
    /// a stream without `EOS` is accepted when its coordinate run is whole.
    pub fn decode(&self, stream: &TokenStream) -> Result<SeamSequence> {
        self.decode_counted(stream).map(|(seq, _)| seq)
    }

    /// Like [`Codec::decode`], also returning how many segments the stream spelled
    /// out before degenerate ones were dropped.
    pub fn decode_counted(&self, stream: &TokenStream) -> Result<(SeamSequence, usize)> {
        let toks = &stream.tokens;
        match toks.first() {
            Some(&t) if t == self.bos() => {}
            _ => return Err(Error::Codec { position: 0, message: "stream must start with BOS".into() }),
        }
        let mut end = toks.len();
        for (i, &t) in toks.iter().enumerate().skip(1) {
            if t < self.bins {
                continue;
            }
            if t == self.eos() {
                end = i;
                if let Some(off) = toks[i + 1..].iter().position(|&p| p != self.pad()) {
                    return Err(Error::Codec { position: i + 1 + off, message: "only padding may follow EOS".into() });
                }
                break;
            }
            let what = match t {
                t if t == self.bos() => "BOS",
                t if t == self.pad() => "PAD",
                _ => "unknown token",
            };
            return Err(Error::Codec { position: i, message: format!("{what} inside coordinate run") });
        }
        let coords = &toks[1..end];
        if coords.len() % 6 != 0 {
            return Err(Error::Codec {
                position: 1 + coords.len() - coords.len() % 6,
                message: format!("coordinate run of {} tokens is not a whole number of segments", coords.len()),
            });
        }
        let emitted = coords.len() / 6;
        let mut raw = Vec::with_capacity(emitted);
        for chunk in coords.chunks_exact(6) {
            let p = [self.dequantize(chunk[0])?, self.dequantize(chunk[1])?, self.dequantize(chunk[2])?];
            let q = [self.dequantize(chunk[3])?, self.dequantize(chunk[4])?, self.dequantize(chunk[5])?];
            raw.push((p, q));
        }
        Ok((canonical_sort_lenient(raw), emitted))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenStream {
    pub tokens: Vec<u32>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Little-endian 16-bit words.
    pub fn to_le_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(2 * self.tokens.len());
        for &t in &self.tokens {
            let w =
                u16::try_from(t).map_err(|_| Error::OutOfRange { value: t as f64, lo: 0.0, hi: u16::MAX as f64 })?;
            out.extend_from_slice(&w.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() % 2 != 0 {
            return Err(Error::Codec {
                position: bytes.len() / 2,
                message: "odd byte count in 16-bit token file".into(),
            });
        }
        Ok(TokenStream { tokens: bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]]) as u32).collect() })
    }
}

/// On-disk seam format: `{"normalized": true, "segments": [[[x,y,z],[x,y,z]], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeamFile {
    pub normalized: bool,
    pub segments: Vec<[Vec3; 2]>,
}

impl SeamFile {
    pub fn from_sequence(seq: &SeamSequence) -> Self {
        SeamFile { normalized: true, segments: seq.segments().iter().map(|s| [s.head, s.tail]).collect() }
    }

    /// Raw segment pairs, in file order.
    pub fn pairs(&self) -> impl Iterator<Item = (Vec3, Vec3)> + '_ {
        self.segments.iter().map(|s| (s[0], s[1]))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn codec() -> Codec {
        Codec::default()
    }

    #[test]
    fn quantize_edges() {
        let c = codec();
        assert_eq!(c.quantize(-1.0).unwrap(), 0);
        assert_eq!(c.quantize(1.0).unwrap(), 1023);
        assert_eq!(c.quantize(0.0).unwrap(), 512);
        assert_eq!(c.quantize(1.0 + 5e-10).unwrap(), 1023);
        assert_eq!(c.quantize(-1.0 - 5e-10).unwrap(), 0);
        assert!(c.quantize(1.01).is_err());
        assert!(c.quantize(f64::NAN).is_err());
    }

    #[test]
    fn dequantize_centers() {
        let c = codec();
        assert_eq!(c.dequantize(0).unwrap(), -0.9990234375);
        assert_eq!(c.dequantize(1023).unwrap(), 0.9990234375);
        assert!(c.dequantize(1024).is_err());
    }

    #[test]
    fn every_bin_round_trips() {
        let c = codec();
        for b in 0..1024 {
            assert_eq!(c.quantize(c.dequantize(b).unwrap()).unwrap(), b);
        }
    }

    #[test]
    fn endpoint_orientation() {
        let s = canonical_sort([([0.0, 1.0, 0.0], [0.0, 0.0, 0.0])]).unwrap();
        assert_eq!(s.segments()[0].head(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn segment_order_uses_tail_key() {
        let a = ([0.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let b = ([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        let s = canonical_sort([a, b]).unwrap();
        assert_eq!(s.segments()[0].tail(), [1.0, 0.0, 0.0]);
        assert_eq!(s.segments()[1].tail(), [0.0, 1.0, 0.0]);

        // Cross-check with the brute-force minimum over both input orders.
        let perms = [[a, b], [b, a]];
        let sorted: Vec<_> = perms.iter().map(|p| canonical_sort(p.to_vec()).unwrap()).collect();
        assert_eq!(sorted[0], sorted[1]);
    }

    #[test]
    fn degenerate_and_duplicates() {
        assert!(canonical_sort([([0.1; 3], [0.1; 3])]).is_err());
        assert!(canonical_sort(Vec::new()).is_err());
        let s =
            canonical_sort([([0.0; 3], [1.0, 0.0, 0.0]), ([1.0, 0.0, 0.0], [0.0; 3]), ([0.5; 3], [0.5; 3])]).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn token_counts() {
        let c = codec();
        let raw: Vec<_> = (0..5).map(|i| ([0.1 * i as f64, 0.0, 0.0], [0.1 * i as f64, 0.5, 0.0])).collect();
        let seq = c.canonicalize(raw).unwrap();
        let stream = c.encode(&seq).unwrap();
        assert_eq!(stream.len(), 32);
        assert_eq!(stream.tokens[0], c.bos());
        assert_eq!(*stream.tokens.last().unwrap(), c.eos());
        assert_eq!(c.decode(&stream).unwrap(), seq);
        assert!(c.encode(&SeamSequence::default()).is_err());
    }

    #[test]
    fn encode_respects_limit() {
        let c = Codec::new(1024, 2).unwrap();
        let raw: Vec<_> = (0..3).map(|i| ([0.1 * i as f64, 0.0, 0.0], [0.0, 0.5, 0.0])).collect();
        let seq = c.canonicalize(raw).unwrap();
        assert!(matches!(c.encode(&seq), Err(Error::SequenceTooLong { .. })));
    }

    #[test]
    fn decode_drops_collapsed_segments() {
        let c = codec();
        let mut t = vec![c.bos()];
        t.extend([10, 20, 30, 10, 20, 30]);
        t.extend([10, 20, 30, 11, 20, 30]);
        t.push(c.eos());
        let (seq, emitted) = c.decode_counted(&TokenStream { tokens: t }).unwrap();
        assert_eq!(emitted, 2);
        assert_eq!(seq.len(), 1);
    }

    #[test]
    fn decode_errors_name_positions() {
        let c = codec();
        let t = TokenStream { tokens: vec![c.bos(), 1, 2, 3, 4, c.eos()] };
        match c.decode(&t) {
            Err(Error::Codec { position, .. }) => assert_eq!(position, 1),
            other => panic!("{other:?}"),
        }
        let t = TokenStream { tokens: vec![c.bos(), 1, 2, c.pad(), 4, 5, 6, c.eos()] };
        match c.decode(&t) {
            Err(Error::Codec { position, .. }) => assert_eq!(position, 3),
            other => panic!("{other:?}"),
        }
        let t = TokenStream { tokens: vec![1, 2] };
        assert!(matches!(c.decode(&t), Err(Error::Codec { position: 0, .. })));
        let t = TokenStream { tokens: vec![c.bos(), 1, 2, 3, 4, 5, 6, c.eos(), c.pad(), c.pad()] };
        assert_eq!(c.decode(&t).unwrap().len(), 1);
    }

    #[test]
    fn binary_token_file() {
        let t = TokenStream { tokens: vec![1024, 0, 1023, 1025] };
        let bytes = t.to_le_bytes().unwrap();
        assert_eq!(&bytes[..2], &[0x00, 0x04]);
        assert_eq!(TokenStream::from_le_bytes(&bytes).unwrap(), t);
    }

    fn point() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-1.0f64..=1.0)
    }

    proptest! {
        #[test]
        fn quantization_error_is_bounded(c in -1.0f64..=1.0) {
            let k = codec();
            let back = k.dequantize(k.quantize(c).unwrap()).unwrap();
            prop_assert!((back - c).abs() <= 1.0 / 1024.0);
        }

        #[test]
        fn yzx_is_a_total_order(a in point(), b in point(), c in point()) {
            prop_assert_eq!(yzx_cmp(&a, &b), yzx_cmp(&b, &a).reverse());
            if yzx_cmp(&a, &b) != Ordering::Greater && yzx_cmp(&b, &c) != Ordering::Greater {
                prop_assert_ne!(yzx_cmp(&a, &c), Ordering::Greater);
            }
        }

        #[test]
        fn sort_ignores_input_order_and_orientation(
            segs in prop::collection::vec((point(), point()), 1..20),
            flips in prop::collection::vec(any::<bool>(), 20),
            seed in any::<u64>(),
        ) {
            let k = codec();
            let Ok(base) = k.canonicalize(segs.clone()) else { return Ok(()) };
            let mut shuffled: Vec<_> = segs
                .iter()
                .zip(&flips)
                .map(|(&(p, q), &f)| if f { (q, p) } else { (p, q) })
                .collect();
            let n = shuffled.len();
            for i in 0..n {
                let j = (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) % n as u64) as usize;
                shuffled.swap(i, j);
            }
            let again = k.canonicalize(shuffled).unwrap();
            prop_assert_eq!(&again, &base);
            let twice = canonical_sort(base.segments().iter().map(|s| (s.head(), s.tail()))).unwrap();
            prop_assert_eq!(twice, base);
        }

        #[test]
        fn streams_round_trip(bins in prop::collection::vec(0u32..1024, 6..120)) {
            let k = codec();
            let whole = bins.len() / 6 * 6;
            let mut tokens = vec![k.bos()];
            tokens.extend_from_slice(&bins[..whole]);
            tokens.push(k.eos());
            let seq = k.decode(&TokenStream { tokens }).unwrap();
            if !seq.is_empty() {
                let canon = k.encode(&seq).unwrap();
                prop_assert_eq!(k.encode(&k.decode(&canon).unwrap()).unwrap(), canon);
            }
        }
    }
}
