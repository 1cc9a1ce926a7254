//! Synthetic frames. Every registered object is a square tile; the outer
//! ring colour identifies the object and its states, the inner square
//! encodes failure markers so a detector can read them back.

use std::sync::atomic::{AtomicUsize, Ordering};

use sha2::{Digest, Sha256};

use super::WorldState;
use crate::fm::{CompletionProvider, CompletionRequest, ProviderError};
use crate::kg::{FailureType, ObjectNode};
use crate::monitor::{fit, FailureReport, Frame};

pub const TILE: u32 = 12;
const INNER_OFFSET: u32 = 3;
const INNER: u32 = 6;
const NOMINAL: [u8; 3] = [255, 255, 255];
const ABSENT: [u8; 3] = [20, 20, 20];

pub fn marker_color(t: FailureType) -> Option<[u8; 3]> {
    Some(match t {
        FailureType::Overpour => [0, 0, 255],
        FailureType::Slip => [255, 255, 0],
        FailureType::IncorrectMix => [255, 0, 255],
        FailureType::MisplacedPour => [0, 255, 255],
        FailureType::Collateral => [255, 0, 0],
        FailureType::UnsafeAction | FailureType::Other => return None,
    })
}

fn color_marker(c: [u8; 3]) -> Option<FailureType> {
    FailureType::ALL.into_iter().find(|t| marker_color(*t) == Some(c))
}

fn outer_color(node: &ObjectNode) -> [u8; 3] {
    let d = Sha256::digest(node.canonical_line().as_bytes());
    // Keep the ring away from the pure marker colours.
    [d[0] / 2 + 40, d[1] / 2 + 40, d[2] / 2 + 40]
}

fn inner_color(node: &ObjectNode) -> [u8; 3] {
    FailureType::ALL
        .into_iter()
        .find(|t| t.marker_state().is_some_and(|m| node.has_state(m)))
        .and_then(marker_color)
        .unwrap_or(NOMINAL)
}

/// Tiles per row for `n` objects.
pub fn layout_cols(n: usize) -> u32 {
    ((n.max(1) as f64).sqrt().ceil() as u32).max(1)
}

/// One frame of `world` with tiles in `registry` order.
pub fn render_scene(world: &WorldState, registry: &[String], timestamp: f64) -> Frame {
    let cols = layout_cols(registry.len());
    let side = cols * TILE;
    let mut rgb = vec![0u8; (side * side * 3) as usize];
    for (k, name) in registry.iter().enumerate() {
        let (tx, ty) = ((k as u32 % cols) * TILE, (k as u32 / cols) * TILE);
        let (outer, inner) = match world.get(name) {
            Some(node) => (outer_color(node), inner_color(node)),
            None => (ABSENT, ABSENT),
        };
        for y in 0..TILE {
            for x in 0..TILE {
                let in_inner = (INNER_OFFSET..INNER_OFFSET + INNER).contains(&x)
                    && (INNER_OFFSET..INNER_OFFSET + INNER).contains(&y);
                let i = (((ty + y) * side + tx + x) * 3) as usize;
                rgb[i..i + 3].copy_from_slice(if in_inner { &inner } else { &outer });
            }
        }
    }
    Frame::new(side, side, rgb, timestamp).expect("non-empty scene")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    /// Seconds between frames.
    pub interval: f64,
    /// Simulated duration of one unit.
    pub unit_duration: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            interval: 5.0,
            unit_duration: 60.0,
        }
    }
}

/// Frames for one unit: the pre-state during the first half, the post-state after.
pub fn render_unit(pre: &WorldState, post: &WorldState, cfg: &RenderConfig) -> Vec<Frame> {
    let registry = post.registry();
    let n = (cfg.unit_duration / cfg.interval).floor() as usize + 1;
    (0..n)
        .map(|i| {
            let t = i as f64 * cfg.interval;
            let w = if t < cfg.unit_duration / 2.0 { pre } else { post };
            render_scene(w, registry, t)
        })
        .collect()
}

/// A detector that reads the rendered tiles back from the attached images.
///
/// It compares the first and last observed frame and reports markers that
/// appeared in between. The scene object order comes from the prompt.
#[derive(Debug, Default)]
pub struct FrameOracle {
    calls: AtomicUsize,
}

impl FrameOracle {
    pub fn new() -> Self {
        Self::default()
    }
}

pub fn explanation(t: FailureType, objects: &[&str]) -> String {
    let o = objects.join(" and ");
    match t {
        FailureType::Overpour => format!("too much liquid was poured and the {o} became watery"),
        FailureType::Slip => format!("the {o} slipped from the gripper and was dropped"),
        FailureType::IncorrectMix => format!("the {o} was unevenly mixed"),
        FailureType::MisplacedPour => format!("the pour missed its target and the {o} was spilled"),
        FailureType::Collateral => format!("the {o} was knocked over during manipulation"),
        FailureType::UnsafeAction => format!("unsafe action involving {o}"),
        FailureType::Other => format!("unexpected change to {o}"),
    }
}

fn line_after<'a>(text: &'a str, label: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(label)).map(str::trim)
}

/// `(cols, rows, placed)` from "a RxC grid of N frames".
fn grid_shape(text: &str) -> Option<(u32, u32, u32)> {
    let rest = text.split("One image: a ").nth(1)?;
    let (shape, rest) = rest.split_once(" grid of ")?;
    let (r, c) = shape.split_once('x')?;
    let n = rest.split_whitespace().next()?;
    Some((c.parse().ok()?, r.parse().ok()?, n.parse().ok()?))
}

impl CompletionProvider for FrameOracle {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let user = &request.prompt.user;
        let scene: Vec<&str> = line_after(user, "Scene objects:")
            .ok_or_else(|| ProviderError::Response("no scene object list in prompt".into()))?
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        let decode = |i: usize| {
            let img = request
                .images
                .get(i)
                .ok_or_else(|| ProviderError::Response("missing image".into()))?;
            Frame::from_png(&img.png, 0.0).map_err(|e| ProviderError::Response(e.to_string()))
        };
        let cols = layout_cols(scene.len());
        let side = cols * TILE;
        // Pixel readers for the first and last observation.
        type Reader<'r> = Box<dyn Fn(u32, u32) -> [u8; 3] + 'r>;
        let (first, last): (Reader, Reader) =
            match grid_shape(user) {
                Some((gc, gr, placed)) if request.images.len() == 1 => {
                    let g = decode(0)?;
                    let (cw, ch) = (g.width / gc, g.height / gr);
                    let (ox, oy, tw, th) = fit(side, side, cw, ch);
                    let map = move |cell: u32, x: u32, y: u32| {
                        let cx = (cell % gc) * cw + ox + (x * tw).div_ceil(side);
                        let cy = (cell / gc) * ch + oy + (y * th).div_ceil(side);
                        (cx, cy)
                    };
                    let g2 = g.clone();
                    let last_cell = placed.saturating_sub(1);
                    (
                        Box::new(move |x, y| {
                            let (a, b) = map(0, x, y);
                            g.pixel(a, b)
                        }),
                        Box::new(move |x, y| {
                            let (a, b) = map(last_cell, x, y);
                            g2.pixel(a, b)
                        }),
                    )
                }
                _ => {
                    let f0 = decode(0)?;
                    let f1 = decode(request.images.len().saturating_sub(1))?;
                    (Box::new(move |x, y| f0.pixel(x, y)), Box::new(move |x, y| f1.pixel(x, y)))
                }
            };
        let mut found: Vec<(FailureType, &str)> = Vec::new();
        for (k, name) in scene.iter().enumerate() {
            let (tx, ty) = ((k as u32 % cols) * TILE, (k as u32 / cols) * TILE);
            let (px, py) = (tx + INNER_OFFSET, ty + INNER_OFFSET);
            let (before, after) = (first(px, py), last(px, py));
            if let Some(t) = color_marker(after) {
                if before != after {
                    found.push((t, name));
                }
            }
        }
        let Some(kind) = found.iter().map(|(t, _)| *t).min() else {
            return Ok("FAILED: no\n".to_string());
        };
        let objects: Vec<&str> = found.iter().filter(|(t, _)| *t == kind).map(|(_, n)| *n).collect();
        Ok(FailureReport::failure(kind, &explanation(kind, &objects), &objects).to_block())
    }

    fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::parse_subgraph;
    use crate::monitor::{detect, DetectConfig, DetectionContext, DetectionMode};
    use crate::sim::FailureInjection;
    use std::collections::BTreeSet;

    fn scene(n: usize) -> WorldState {
        let nodes = (0..n).map(|i| ObjectNode::new(&format!("obj{i}"), &["fine"])).collect();
        WorldState::new(nodes, BTreeSet::new()).unwrap()
    }

    #[test]
    fn tiles_encode_markers() {
        let mut w = scene(5);
        w.put(ObjectNode::new("obj3", &["watery"]));
        w.remove("obj1");
        let f = render_scene(&w, w.registry(), 0.0);
        assert_eq!((f.width, f.height), (36, 36));
        assert_eq!(f.pixel(6, 6), NOMINAL);
        assert_eq!(f.pixel(18, 6), ABSENT);
        assert_eq!(f.pixel(6, 18), [0, 0, 255]);
        assert_ne!(f.pixel(0, 0), NOMINAL);
    }

    #[test]
    fn unit_frames_switch_at_half_time() {
        let pre = scene(2);
        let mut post = pre.clone();
        post.put(ObjectNode::new("obj0", &["dropped"]));
        let frames = render_unit(&pre, &post, &RenderConfig::default());
        assert_eq!(frames.len(), 13);
        assert_eq!(frames[5].pixel(6, 6), NOMINAL);
        assert_eq!(frames[6].pixel(6, 6), [255, 255, 0]);
    }

    fn oracle_report(n: usize, mode: DetectionMode) -> Option<FailureReport> {
        let unit = parse_subgraph("U\nI obj0 | fine\nI obj1 | fine\nM pour\nO obj0 | mixed | obj1\n").unwrap().remove(0);
        let pre = scene(n);
        let mut post = pre.clone();
        let inj = FailureInjection::new(0, FailureType::Collateral).with_target(&format!("obj{}", n - 1));
        inj.resolve(&unit, &post).unwrap().apply(&mut post, &unit).unwrap();
        let frames = render_unit(&pre, &post, &RenderConfig::default());
        let ctx = DetectionContext { unit: &unit, scene: post.registry() };
        let cfg = DetectConfig { mode, ..DetectConfig::default() };
        detect(&FrameOracle::new(), &frames, 60.0, ctx, &cfg).unwrap()
    }

    #[test]
    fn oracle_agrees_across_modes_and_scene_sizes() {
        for n in [3, 5, 17, 40, 120] {
            let g = oracle_report(n, DetectionMode::Grid).unwrap();
            let f = oracle_report(n, DetectionMode::Frames).unwrap();
            assert_eq!(g, f, "scene of {n}");
            assert_eq!(g.failure_type, Some(FailureType::Collateral));
            assert_eq!(g.affected_objects, BTreeSet::from([format!("obj{}", n - 1)]));
        }
    }

    #[test]
    fn nominal_unit_reads_as_no_failure() {
        let unit = parse_subgraph("U\nI obj0 | fine\nM pick\nO obj0 | held\n").unwrap().remove(0);
        let pre = scene(3);
        let mut post = pre.clone();
        post.apply_nominal(&unit);
        let frames = render_unit(&pre, &post, &RenderConfig::default());
        let ctx = DetectionContext { unit: &unit, scene: post.registry() };
        assert_eq!(detect(&FrameOracle::new(), &frames, 60.0, ctx, &DetectConfig::default()), Ok(None));
    }
}
