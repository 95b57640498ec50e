//! Sparse painted labels, masked evaluation and the triage ledger.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{Image, PixelFormat, SegMask, CLASS_BACKGROUND, CLASS_FROZEN_WATER, CLASS_UNLABELED};

pub const UNLABELED_RGB: [u8; 3] = [0, 0, 0];
/// At most this many off-palette colors are listed in a parse error.
const MAX_REPORTED_COLORS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorEntry {
    pub name: String,
    pub id: u8,
    pub rgb: [u8; 3],
}

/// RGB → class id lookup. Black is reserved for unlabeled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorTable {
    entries: Vec<ColorEntry>,
}

impl ColorTable {
    pub fn new(entries: Vec<ColorEntry>) -> Result<Self, AnnotateError> {
        for (i, e) in entries.iter().enumerate() {
            if e.rgb == UNLABELED_RGB {
                return Err(AnnotateError::ColorTable(alloc::format!("{} uses black, reserved for unlabeled", e.name)));
            }
            if e.id == CLASS_UNLABELED {
                return Err(AnnotateError::ColorTable(alloc::format!("{} uses reserved id 255", e.name)));
            }
            if let Some(o) = entries[..i].iter().find(|o| o.rgb == e.rgb) {
                return Err(AnnotateError::ColorTable(alloc::format!("{} and {} share color {:?}", o.name, e.name, e.rgb)));
            }
        }
        Ok(Self { entries })
    }

    /// Purple frozen water, green background.
    pub fn default_palette() -> Self {
        Self {
            entries: alloc::vec![
                ColorEntry { name: "frozen_water".into(), id: CLASS_FROZEN_WATER, rgb: [128, 0, 128] },
                ColorEntry { name: "background".into(), id: CLASS_BACKGROUND, rgb: [0, 128, 0] },
            ],
        }
    }

    pub fn entries(&self) -> &[ColorEntry] {
        &self.entries
    }

    pub fn lookup(&self, rgb: [u8; 3]) -> Option<u8> {
        self.entries.iter().find(|e| e.rgb == rgb).map(|e| e.id)
    }

    pub fn class_ids(&self) -> Vec<u8> {
        let mut ids: Vec<u8> = self.entries.iter().map(|e| e.id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffPalette {
    pub rgb: [u8; 3],
    /// First occurrence in row-major order.
    pub x: u32,
    pub y: u32,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnnotateError {
    #[error("invalid color table: {0}")]
    ColorTable(String),
    #[error("label layer must be RGB")]
    NotRgb,
    #[error("dimension mismatch: {a:?} vs {b:?}")]
    Dimensions { a: (u32, u32), b: (u32, u32) },
    #[error("{} off-palette colors, first {:?} at ({}, {})", .0.len(), .0[0].rgb, .0[0].x, .0[0].y)]
    UnknownColors(Vec<OffPalette>),
    #[error("no labeled pixels")]
    EmptySupport,
    #[error("illegal transition {from:?} -> {to:?} for image {image}")]
    IllegalTransition { image: String, from: TriageState, to: TriageState },
    #[error("image {0} is not in the ledger")]
    UnknownImage(String),
    #[error("image {0} is already in the ledger")]
    DuplicateImage(String),
    #[error("ledger is empty")]
    EmptyLedger,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseLabelImage {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    /// Class per pixel, 255 for unlabeled.
    pub labels: Vec<u8>,
}

impl SparseLabelImage {
    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|&&c| c != CLASS_UNLABELED).count()
    }

    pub fn unlabeled_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            return 1.0;
        }
        1.0 - self.labeled_count() as f64 / self.labels.len() as f64
    }
}

/// Exact-color parse of a painted label layer. `image_dims` is the source
/// image the layer belongs to.
pub fn parse_sparse_labels(
    image_id: &str,
    layer: &Image,
    image_dims: (u32, u32),
    table: &ColorTable,
) -> Result<SparseLabelImage, AnnotateError> {
    if layer.format != PixelFormat::Rgb8 {
        return Err(AnnotateError::NotRgb);
    }
    if (layer.width, layer.height) != image_dims {
        return Err(AnnotateError::Dimensions { a: (layer.width, layer.height), b: image_dims });
    }
    let mut labels = Vec::with_capacity(layer.pixel_count());
    let mut bad: Vec<OffPalette> = Vec::new();
    for (k, c) in layer.data.chunks_exact(3).enumerate() {
        let rgb = [c[0], c[1], c[2]];
        if rgb == UNLABELED_RGB {
            labels.push(CLASS_UNLABELED);
        } else if let Some(id) = table.lookup(rgb) {
            labels.push(id);
        } else {
            labels.push(CLASS_UNLABELED);
            match bad.iter_mut().find(|b| b.rgb == rgb) {
                Some(b) => b.count += 1,
                None => bad.push(OffPalette { rgb, x: k as u32 % layer.width, y: k as u32 / layer.width, count: 1 }),
            }
        }
    }
    if !bad.is_empty() {
        bad.sort_by(|a, b| b.count.cmp(&a.count).then((a.y, a.x).cmp(&(b.y, b.x))));
        bad.truncate(MAX_REPORTED_COLORS);
        return Err(AnnotateError::UnknownColors(bad));
    }
    Ok(SparseLabelImage { image_id: image_id.into(), width: layer.width, height: layer.height, labels })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_id: u8,
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    /// `None` when the class has no labeled pixels.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedMetrics {
    pub labeled_pixels: u64,
    pub pixel_accuracy: f64,
    pub classes: Vec<ClassMetrics>,
}

/// Per-class precision, recall and IoU over labeled pixels only. Reported
/// classes are those in `classes` plus any appearing in the labels.
pub fn masked_metrics(pred: &SegMask, sparse: &SparseLabelImage, classes: &[u8]) -> Result<MaskedMetrics, AnnotateError> {
    if (pred.width, pred.height) != (sparse.width, sparse.height) {
        return Err(AnnotateError::Dimensions { a: (pred.width, pred.height), b: (sparse.width, sparse.height) });
    }
    // [truth][pred] counts restricted to labeled pixels.
    let mut tp = [0u64; 256];
    let mut pred_n = [0u64; 256];
    let mut truth_n = [0u64; 256];
    let mut labeled = 0u64;
    for (&t, &p) in sparse.labels.iter().zip(&pred.classes) {
        if t == CLASS_UNLABELED {
            continue;
        }
        labeled += 1;
        truth_n[t as usize] += 1;
        pred_n[p as usize] += 1;
        if t == p {
            tp[t as usize] += 1;
        }
    }
    if labeled == 0 {
        return Err(AnnotateError::EmptySupport);
    }
    let mut ids: Vec<u8> = classes.to_vec();
    ids.extend((0..=254u8).filter(|&c| truth_n[c as usize] > 0));
    ids.retain(|&c| c != CLASS_UNLABELED);
    ids.sort_unstable();
    ids.dedup();
    let out = ids
        .into_iter()
        .map(|c| {
            let i = c as usize;
            let (tp, fp, fn_) = (tp[i], pred_n[i] - tp[i], truth_n[i] - tp[i]);
            let defined = truth_n[i] > 0;
            ClassMetrics {
                class_id: c,
                true_positive: tp,
                false_positive: fp,
                false_negative: fn_,
                precision: (defined && tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64),
                recall: defined.then(|| tp as f64 / (tp + fn_) as f64),
                iou: defined.then(|| tp as f64 / (tp + fp + fn_) as f64),
            }
        })
        .collect();
    let correct: u64 = tp.iter().sum();
    Ok(MaskedMetrics { labeled_pixels: labeled, pixel_accuracy: correct as f64 / labeled as f64, classes: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriageState {
    Unreviewed,
    GroundTruthReady,
    MinorCorrectionsNeeded,
    HardNegative,
    Accepted,
}

impl TriageState {
    pub const TRIAGE: [TriageState; 3] =
        [TriageState::GroundTruthReady, TriageState::MinorCorrectionsNeeded, TriageState::HardNegative];

    pub fn can_transition(self, to: TriageState) -> bool {
        use TriageState::*;
        matches!(
            (self, to),
            (Unreviewed, GroundTruthReady | MinorCorrectionsNeeded | HardNegative)
                | (GroundTruthReady | MinorCorrectionsNeeded, Accepted)
                | (HardNegative, Unreviewed)
        )
    }
}

/// One line of the ledger file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub image_id: String,
    /// Unix seconds.
    pub t: f64,
    pub from: TriageState,
    pub to: TriageState,
    /// Annotator time spent on this step.
    pub minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub state: TriageState,
    pub minutes: f64,
    /// First triage decision; fixes which path the image is counted under.
    pub first_triage: Option<TriageState>,
    pub transitions: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TriageLedger {
    images: BTreeMap<String, ImageRecord>,
    log: Vec<Transition>,
}

impl TriageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_image(&mut self, image_id: &str) -> Result<(), AnnotateError> {
        if self.images.contains_key(image_id) {
            return Err(AnnotateError::DuplicateImage(image_id.into()));
        }
        let rec = ImageRecord { state: TriageState::Unreviewed, minutes: 0.0, first_triage: None, transitions: 0 };
        self.images.insert(image_id.into(), rec);
        Ok(())
    }

    pub fn transition(&mut self, image_id: &str, to: TriageState, t: f64, minutes: f64) -> Result<&Transition, AnnotateError> {
        let rec = self.images.get_mut(image_id).ok_or_else(|| AnnotateError::UnknownImage(image_id.into()))?;
        if !rec.state.can_transition(to) {
            return Err(AnnotateError::IllegalTransition { image: image_id.into(), from: rec.state, to });
        }
        let tr = Transition { image_id: image_id.into(), t, from: rec.state, to, minutes };
        rec.state = to;
        rec.minutes += minutes;
        rec.transitions += 1;
        if rec.first_triage.is_none() && TriageState::TRIAGE.contains(&to) {
            rec.first_triage = Some(to);
        }
        self.log.push(tr);
        Ok(self.log.last().expect("just pushed"))
    }

    /// Rebuilds a ledger from its transition log, registering images on
    /// first sight and validating every step.
    pub fn replay<I: IntoIterator<Item = Transition>>(log: I) -> Result<Self, AnnotateError> {
        let mut l = Self::new();
        for tr in log {
            if !l.images.contains_key(&tr.image_id) {
                l.add_image(&tr.image_id)?;
            }
            let cur = l.images[&tr.image_id].state;
            if cur != tr.from {
                return Err(AnnotateError::IllegalTransition { image: tr.image_id, from: cur, to: tr.to });
            }
            l.transition(&tr.image_id, tr.to, tr.t, tr.minutes)?;
        }
        Ok(l)
    }

    pub fn state(&self, image_id: &str) -> Option<TriageState> {
        self.images.get(image_id).map(|r| r.state)
    }

    pub fn images(&self) -> &BTreeMap<String, ImageRecord> {
        &self.images
    }

    pub fn log(&self) -> &[Transition] {
        &self.log
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub path: TriageState,
    pub images: usize,
    pub fraction: f64,
    pub mean_minutes: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageReport {
    pub total_images: usize,
    pub triaged_images: usize,
    pub paths: Vec<PathSummary>,
    pub state_counts: BTreeMap<TriageState, usize>,
    /// Mean minutes across every image with at least one transition.
    pub mean_minutes: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn triage_report(ledger: &TriageLedger) -> Result<TriageReport, AnnotateError> {
    if ledger.is_empty() {
        return Err(AnnotateError::EmptyLedger);
    }
    let mut warnings = Vec::new();
    let mut state_counts = BTreeMap::new();
    let mut per_path: BTreeMap<TriageState, (usize, f64)> = BTreeMap::new();
    let (mut timed, mut total_min) = (0usize, 0.0);
    for (id, r) in &ledger.images {
        *state_counts.entry(r.state).or_insert(0) += 1;
        if r.transitions == 0 {
            warnings.push(alloc::format!("image {id} has no transitions; excluded from means"));
            continue;
        }
        timed += 1;
        total_min += r.minutes;
        if let Some(p) = r.first_triage {
            let e = per_path.entry(p).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += r.minutes;
        }
    }
    let triaged: usize = per_path.values().map(|v| v.0).sum();
    let paths = TriageState::TRIAGE
        .iter()
        .map(|&p| {
            let (n, m) = per_path.get(&p).copied().unwrap_or((0, 0.0));
            PathSummary {
                path: p,
                images: n,
                fraction: if triaged == 0 { 0.0 } else { n as f64 / triaged as f64 },
                mean_minutes: (n > 0).then(|| m / n as f64),
            }
        })
        .collect();
    Ok(TriageReport {
        total_images: ledger.images.len(),
        triaged_images: triaged,
        paths,
        state_counts,
        mean_minutes: (timed > 0).then(|| total_min / timed as f64),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use proptest::prelude::*;
    use TriageState::*;

    fn layer(w: u32, h: u32, f: impl Fn(u32, u32) -> [u8; 3]) -> Image {
        let data = (0..w * h).flat_map(|k| f(k % w, k / w)).collect();
        Image::new(w, h, PixelFormat::Rgb8, data).unwrap()
    }

    #[test]
    fn black_layer_is_all_unlabeled() {
        let s = parse_sparse_labels("a", &layer(8, 4, |_, _| [0; 3]), (8, 4), &ColorTable::default_palette()).unwrap();
        assert_eq!(s.labeled_count(), 0);
        assert_eq!(s.unlabeled_fraction(), 1.0);
    }

    #[test]
    fn purple_green_paint() {
        let l = layer(10, 10, |x, y| match (x < 4, y < 5) {
            (true, _) => [128, 0, 128],
            (false, true) => [0, 128, 0],
            _ => [0, 0, 0],
        });
        let s = parse_sparse_labels("a", &l, (10, 10), &ColorTable::default_palette()).unwrap();
        assert_eq!(s.labels.iter().filter(|&&c| c == CLASS_FROZEN_WATER).count(), 40);
        assert_eq!(s.labels.iter().filter(|&&c| c == CLASS_BACKGROUND).count(), 30);
        assert!((s.unlabeled_fraction() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn off_palette_pixel_is_named() {
        let l = layer(6, 6, |x, y| if (x, y) == (4, 2) { [127, 0, 128] } else { [0, 128, 0] });
        match parse_sparse_labels("a", &l, (6, 6), &ColorTable::default_palette()) {
            Err(AnnotateError::UnknownColors(v)) => {
                assert_eq!(v, [OffPalette { rgb: [127, 0, 128], x: 4, y: 2, count: 1 }]);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_sparse_labels("a", &l, (6, 5), &ColorTable::default_palette()),
            Err(AnnotateError::Dimensions { .. })
        ));
    }

    #[test]
    fn table_validation() {
        let e = |name: &str, id, rgb| ColorEntry { name: name.into(), id, rgb };
        assert!(ColorTable::new(alloc::vec![e("a", 1, [1, 2, 3]), e("b", 2, [1, 2, 3])]).is_err());
        assert!(ColorTable::new(alloc::vec![e("a", 1, [0, 0, 0])]).is_err());
        assert!(ColorTable::new(alloc::vec![e("a", 255, [9, 9, 9])]).is_err());
    }

    fn sparse(w: u32, h: u32, labels: Vec<u8>) -> SparseLabelImage {
        SparseLabelImage { image_id: "x".into(), width: w, height: h, labels }
    }

    #[test]
    fn perfect_and_inverted_prediction() {
        let labels: Vec<u8> = (0..100).map(|k| if k % 3 == 0 { 255 } else { (k % 2) as u8 }).collect();
        let s = sparse(10, 10, labels.clone());
        // Agree on labeled pixels, garbage elsewhere.
        let pred = SegMask::new(10, 10, labels.iter().map(|&c| if c == 255 { 1 } else { c }).collect());
        let m = masked_metrics(&pred, &s, &[0, 1]).unwrap();
        assert!(m.classes.iter().all(|c| c.iou == Some(1.0)));
        let inv = SegMask::new(10, 10, labels.iter().map(|&c| if c == 255 { 0 } else { 1 - c }).collect());
        let m = masked_metrics(&inv, &s, &[0, 1]).unwrap();
        assert!(m.classes.iter().all(|c| c.iou == Some(0.0)));
    }

    #[test]
    fn absent_class_undefined_and_empty_support() {
        let s = sparse(2, 2, alloc::vec![0, 0, 255, 255]);
        let m = masked_metrics(&SegMask::filled(2, 2, 1), &s, &[0, 1]).unwrap();
        let c1 = m.classes.iter().find(|c| c.class_id == 1).unwrap();
        assert_eq!((c1.iou, c1.recall, c1.precision), (None, None, None));
        assert_eq!(c1.false_positive, 2);
        let s = sparse(2, 2, alloc::vec![255; 4]);
        assert_eq!(masked_metrics(&SegMask::filled(2, 2, 1), &s, &[0, 1]), Err(AnnotateError::EmptySupport));
    }

    proptest! {
        #[test]
        fn metrics_match_counting_oracle(
            cells in prop::collection::vec((prop_oneof![Just(255u8), 0u8..3], 0u8..3), 1..400),
        ) {
            let n = cells.len() as u32;
            let s = sparse(n, 1, cells.iter().map(|c| c.0).collect());
            let pred = SegMask::new(n, 1, cells.iter().map(|c| c.1).collect());
            match masked_metrics(&pred, &s, &[0, 1, 2]) {
                Err(AnnotateError::EmptySupport) => prop_assert!(cells.iter().all(|c| c.0 == 255)),
                Err(e) => prop_assert!(false, "{e}"),
                Ok(m) => for cm in &m.classes {
                    let k = cm.class_id;
                    let tp = cells.iter().filter(|c| c.0 == k && c.1 == k).count() as u64;
                    let fp = cells.iter().filter(|c| c.0 != 255 && c.0 != k && c.1 == k).count() as u64;
                    let fn_ = cells.iter().filter(|c| c.0 == k && c.1 != k).count() as u64;
                    prop_assert_eq!((cm.true_positive, cm.false_positive, cm.false_negative), (tp, fp, fn_));
                    if tp + fn_ > 0 {
                        prop_assert_eq!(cm.iou, Some(tp as f64 / (tp + fp + fn_) as f64));
                    }
                }
            }
        }

        #[test]
        fn unlabeled_region_is_ignored(
            cells in prop::collection::vec((prop_oneof![Just(255u8), 0u8..2], 0u8..2, 0u8..2), 1..300),
        ) {
            let n = cells.len() as u32;
            let s = sparse(n, 1, cells.iter().map(|c| c.0).collect());
            let a = SegMask::new(n, 1, cells.iter().map(|c| c.1).collect());
            let b = SegMask::new(n, 1, cells.iter().map(|c| if c.0 == 255 { c.2 } else { c.1 }).collect());
            prop_assert_eq!(masked_metrics(&a, &s, &[0, 1]), masked_metrics(&b, &s, &[0, 1]));
        }

        #[test]
        fn illegal_transitions_rejected(steps in prop::collection::vec(0usize..5, 0..20)) {
            const ALL: [TriageState; 5] = [Unreviewed, GroundTruthReady, MinorCorrectionsNeeded, HardNegative, Accepted];
            let mut l = TriageLedger::new();
            l.add_image("i").unwrap();
            for s in steps {
                let to = ALL[s];
                let from = l.state("i").unwrap();
                let r = l.transition("i", to, 0.0, 1.0).map(|_| ());
                prop_assert_eq!(r.is_ok(), from.can_transition(to));
                if r.is_err() {
                    prop_assert_eq!(l.state("i"), Some(from));
                }
            }
            if !l.log().is_empty() {
                prop_assert_eq!(TriageLedger::replay(l.log().to_vec()).unwrap(), l);
            }
        }
    }

    #[test]
    fn accepted_is_terminal() {
        let mut l = TriageLedger::new();
        l.add_image("i").unwrap();
        l.transition("i", GroundTruthReady, 1.0, 0.5).unwrap();
        l.transition("i", Accepted, 2.0, 0.1).unwrap();
        for to in [Unreviewed, GroundTruthReady, MinorCorrectionsNeeded, HardNegative, Accepted] {
            assert!(l.transition("i", to, 3.0, 0.0).is_err());
        }
    }

    #[test]
    fn report_fixture_split() {
        // 100 images split 56/19/25, timed like the field campaign.
        let mut l = TriageLedger::new();
        for k in 0..100 {
            let id = format!("img{k:03}");
            l.add_image(&id).unwrap();
            let t = k as f64;
            if k < 56 {
                l.transition(&id, GroundTruthReady, t, 0.0).unwrap();
                l.transition(&id, Accepted, t, 0.0).unwrap();
            } else if k < 75 {
                l.transition(&id, MinorCorrectionsNeeded, t, 2.02).unwrap();
                l.transition(&id, Accepted, t, 1.03).unwrap();
            } else {
                l.transition(&id, HardNegative, t, 8.52).unwrap();
            }
        }
        let r = triage_report(&l).unwrap();
        let f: Vec<f64> = r.paths.iter().map(|p| p.fraction).collect();
        assert_eq!(f, [0.56, 0.19, 0.25]);
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((r.paths[1].mean_minutes.unwrap() - 3.05).abs() < 1e-12);
        assert_eq!(r.state_counts[&Accepted], 75);
    }

    #[test]
    fn single_image_mean_and_untouched_warning() {
        let mut l = TriageLedger::new();
        l.add_image("a").unwrap();
        l.add_image("b").unwrap();
        l.transition("a", MinorCorrectionsNeeded, 0.0, 2.0).unwrap();
        l.transition("a", Accepted, 1.0, 1.05).unwrap();
        let r = triage_report(&l).unwrap();
        assert!((r.mean_minutes.unwrap() - 3.05).abs() < 1e-12);
        assert_eq!(r.warnings.len(), 1);
        assert_eq!(r.triaged_images, 1);
        assert_eq!(triage_report(&TriageLedger::new()), Err(AnnotateError::EmptyLedger));
    }
}
