use super::query::{build_detection_query, parse_detection_response, DetectionContext, Visual};
use super::sample::select_indexes;
use super::{compose_grid, sample_frames, DetectionMode, FailureReport, Frame, GridSpec, MonitorError, SamplingPolicy};
use crate::fm::{CompletionProvider, CompletionRequest};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    pub policy: SamplingPolicy,
    pub mode: DetectionMode,
    pub grid: GridSpec,
    pub max_tokens: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            policy: SamplingPolicy::default(),
            mode: DetectionMode::Grid,
            grid: GridSpec::default(),
            max_tokens: 512,
        }
    }
}

/// Sample, compose (grid mode), query and parse. A provider or parse error
/// gets one retry; the second error is returned. `None` means no failure.
///
/// In grid mode the sample is thinned to the grid capacity, keeping the
/// first and last frame.
pub fn detect(
    provider: &dyn CompletionProvider,
    frames: &[Frame],
    duration: f64,
    ctx: DetectionContext<'_>,
    config: &DetectConfig,
) -> Result<Option<FailureReport>, MonitorError> {
    let sampled = sample_frames(frames, duration, &config.policy)?;
    let (prompt, images) = match config.mode {
        DetectionMode::Frames => build_detection_query(Visual::Frames(&sampled), ctx),
        DetectionMode::Grid => {
            let keep = select_indexes(&sampled, config.grid.capacity())?;
            let thinned: Vec<Frame> = keep.into_iter().map(|i| sampled[i].clone()).collect();
            let grid = compose_grid(&thinned, config.grid)?;
            build_detection_query(Visual::Grid(&grid), ctx)
        }
    };

    let mut prompt = prompt;
    let mut last_err = None;
    for _ in 0..2 {
        let request = CompletionRequest {
            prompt: &prompt,
            images: &images,
            max_tokens: config.max_tokens,
        };
        let err = match provider.complete(&request) {
            Ok(text) => match parse_detection_response(&text) {
                Ok(mut report) if report.failed => {
                    report.unit_id = Some(ctx.unit.unit_id().clone());
                    return Ok(Some(report));
                }
                Ok(_) => return Ok(None),
                Err(e) => {
                    prompt.user.push_str(&format!(
                        "\n\nYour previous answer could not be read ({e}). Use the labeled format."
                    ));
                    MonitorError::Parse(e)
                }
            },
            Err(e) => MonitorError::Provider(e),
        };
        last_err = Some(err);
    }
    Err(last_err.expect("two attempts were made"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fm::{ScriptEntry, ScriptedProvider};
    use crate::kg::{parse_subgraph, FailureType};

    fn frames() -> Vec<Frame> {
        (0..13).map(|i| Frame::solid(8, 8, [i * 10, 0, 0], i as f64 * 5.0)).collect()
    }

    fn unit() -> crate::kg::FunctionalUnit {
        parse_subgraph("U\nI water | in-cup\nI bowl | flour\nM pour\nO bowl | flour, water\n").unwrap().remove(0)
    }

    #[test]
    fn failure_is_reported_with_unit() {
        let u = unit();
        let scene = vec!["bowl".to_string()];
        let p = ScriptedProvider::always("FAILED: yes\nTYPE: overpour\nEXPLANATION: too watery\nOBJECTS: bowl");
        let r = detect(&p, &frames(), 60.0, DetectionContext { unit: &u, scene: &scene }, &DetectConfig::default())
            .unwrap()
            .unwrap();
        assert_eq!(r.failure_type, Some(FailureType::Overpour));
        assert_eq!(r.unit_id.as_ref(), Some(u.unit_id()));
    }

    #[test]
    fn nominal_is_absent() {
        let u = unit();
        let p = ScriptedProvider::always("No failure observed.");
        let r = detect(&p, &frames(), 60.0, DetectionContext { unit: &u, scene: &[] }, &DetectConfig::default());
        assert_eq!(r, Ok(None));
    }

    #[test]
    fn one_retry_then_error() {
        let u = unit();
        let p = ScriptedProvider::new(vec![]);
        let r = detect(&p, &frames(), 60.0, DetectionContext { unit: &u, scene: &[] }, &DetectConfig::default());
        assert!(matches!(r, Err(MonitorError::Provider(_))));
        assert_eq!(p.call_count(), 2);

        let p = ScriptedProvider::new(vec![ScriptEntry::new("", "gibberish"), ScriptEntry::new("", "FAILED: no")]);
        let r = detect(&p, &frames(), 60.0, DetectionContext { unit: &u, scene: &[] }, &DetectConfig::default());
        assert_eq!(r, Ok(None));
        assert_eq!(p.call_count(), 2);
    }

    #[test]
    fn grid_mode_sends_one_image() {
        struct Count(std::sync::Mutex<Vec<usize>>);
        impl CompletionProvider for Count {
            fn complete(&self, r: &CompletionRequest<'_>) -> Result<String, crate::fm::ProviderError> {
                self.0.lock().unwrap().push(r.images.len());
                Ok("FAILED: no".into())
            }
            fn call_count(&self) -> usize {
                self.0.lock().unwrap().len()
            }
        }
        let u = unit();
        let c = Count(Default::default());
        let ctx = DetectionContext { unit: &u, scene: &[] };
        detect(&c, &frames(), 60.0, ctx, &DetectConfig::default()).unwrap();
        let cfg = DetectConfig { mode: DetectionMode::Frames, ..DetectConfig::default() };
        detect(&c, &frames(), 60.0, ctx, &cfg).unwrap();
        assert_eq!(*c.0.lock().unwrap(), vec![1, 10]);
    }
}
