use std::fmt::Write;
use std::path::{Path, PathBuf};

use crate::geometry::BBox;

use super::attributes::{parse_tags, Attribute};
use super::EvalError;

pub const IMAGE_DIR: &str = "img";
pub const GROUND_TRUTH_FILE: &str = "groundtruth_rect.txt";
pub const ATTRIBUTES_FILE: &str = "attributes.txt";

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "jpg", "jpeg", "bmp", "ppm"];

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub name: String,
    pub frames: Vec<PathBuf>,
    pub ground_truth: Vec<BBox>,
    pub attributes: Vec<Attribute>,
}

impl SequenceDataset {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Parses one box per nonblank line.
pub fn parse_boxes(text: &str) -> Result<Vec<BBox>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.parse::<BBox>()
                .map_err(|e| EvalError::Parse(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

/// Reads `img/*` (sorted by name), `groundtruth_rect.txt` and an optional
/// `attributes.txt` from a benchmark-layout directory.
pub fn load_sequence(dir: &Path) -> Result<SequenceDataset, EvalError> {
    let io = |p: &Path| {
        let p = p.display().to_string();
        move |e: std::io::Error| EvalError::Io(format!("{p}: {e}"))
    };
    let img_dir = dir.join(IMAGE_DIR);
    let mut frames: Vec<PathBuf> = std::fs::read_dir(&img_dir)
        .map_err(io(&img_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    frames.sort();

    let gt_path = dir.join(GROUND_TRUTH_FILE);
    let ground_truth = parse_boxes(&std::fs::read_to_string(&gt_path).map_err(io(&gt_path))?)?;
    if frames.len() != ground_truth.len() {
        return Err(EvalError::CountMismatch {
            frames: frames.len(),
            gt: ground_truth.len(),
        });
    }
    if let Some(i) = ground_truth.iter().position(|b| !b.is_valid()) {
        return Err(EvalError::Parse(format!("ground-truth box {} is not positive-sized", i + 1)));
    }
    let attr_path = dir.join(ATTRIBUTES_FILE);
    let attributes = if attr_path.exists() {
        parse_tags(&std::fs::read_to_string(&attr_path).map_err(io(&attr_path))?)?
    } else {
        Vec::new()
    };
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(SequenceDataset {
        name,
        frames,
        ground_truth,
        attributes,
    })
}

/// `frame_index,x,y,w,h` lines.
pub fn format_results(boxes: &[BBox]) -> String {
    let mut s = String::new();
    for (i, b) in boxes.iter().enumerate() {
        let _ = writeln!(s, "{i},{b}");
    }
    s
}

/// `x,y,w,h` lines, the ground-truth layout.
pub fn format_results_plain(boxes: &[BBox]) -> String {
    boxes.iter().map(|b| format!("{b}\n")).collect()
}

/// Parses `frame_index,x,y,w,h` lines, requiring indices `0, 1, 2, ...`.
pub fn parse_results(text: &str) -> Result<Vec<BBox>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |m: &str| EvalError::Parse(format!("results line {}: {m}", i + 1));
        let (idx, rest) = line.split_once(',').ok_or_else(|| bad("expected frame_index,x,y,w,h"))?;
        let idx: usize = idx.trim().parse().map_err(|_| bad("bad frame index"))?;
        if idx != out.len() {
            return Err(bad(&format!("expected frame index {}, found {idx}", out.len())));
        }
        out.push(rest.parse::<BBox>().map_err(|e| bad(&e.to_string()))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_separators() {
        let b = parse_boxes("12,34,50,60\n12\t34\t50\t60\n\n").unwrap();
        assert_eq!(b, vec![BBox::new(12.0, 34.0, 50.0, 60.0); 2]);
    }

    #[test]
    fn results_round_trip() {
        let boxes = vec![BBox::new(1.0, 2.0, 3.0, 4.0), BBox::new(1.5, 2.0, 3.0, 4.0)];
        let text = format_results(&boxes);
        assert_eq!(text, "0,1,2,3,4\n1,1.5,2,3,4\n");
        assert_eq!(parse_results(&text).unwrap(), boxes);
        assert!(parse_results("1,1,2,3,4\n").is_err());
    }

    #[test]
    fn count_mismatch_message() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join(IMAGE_DIR)).unwrap();
        for i in 0..100 {
            std::fs::write(dir.path().join(IMAGE_DIR).join(format!("{i:04}.png")), b"").unwrap();
        }
        std::fs::write(dir.path().join(GROUND_TRUTH_FILE), "1,1,2,2\n".repeat(99)).unwrap();
        let err = load_sequence(dir.path()).unwrap_err();
        assert_eq!(err.to_string(), "frames=100 gt=99");
    }
}
