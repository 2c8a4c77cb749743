//! The subcommand implementations. Every command returns its printable
//! payload plus any files to write, so tests drive them in-process and the
//! binary stays a thin shell.

use std::path::PathBuf;

use escapedim::conjugacy;
use escapedim::critexp::{self, DimensionEstimate, RhoValue};
use escapedim::dimest::{self, BracketConfig};
use escapedim::nais;
use escapedim::polefield::PoleField;
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, TOOL_NAME, TOOL_VERSION};

pub struct CommandOutput {
    pub stdout: String,
    pub files: Vec<(PathBuf, Vec<u8>)>,
}

impl CommandOutput {
    fn text(stdout: String) -> Self {
        Self {
            stdout,
            files: Vec::new(),
        }
    }
}

fn envelope(config: &RunConfig, data: serde_json::Value) -> String {
    let mut doc = json!({
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "config_hash": config.hash(),
    });
    doc.as_object_mut()
        .unwrap()
        .extend(data.as_object().cloned().unwrap_or_default());
    serde_json::to_string_pretty(&doc).expect("json serializes")
}

fn estimate_json(e: &DimensionEstimate) -> serde_json::Value {
    serde_json::to_value(e).expect("estimate serializes")
}

pub fn bracket_config(config: &RunConfig) -> BracketConfig {
    BracketConfig {
        koebe_k: config.pipeline.koebe_k,
        cover_c: (config.constants.cover_c > 0.0).then_some(config.constants.cover_c),
        ladder: config.pipeline.ladder.clone(),
        desk_r2: config.pipeline.desk_r2,
        pool_hi: config.pipeline.pool_hi,
        tol: config.tolerances.bracket,
        n_levels: config.pipeline.n_levels,
    }
}

/// `delta`: critical exponent of the configured family, optionally restricted
/// to multiplicities ≤ cap; with `trace` a CSV of the bisection steps is
/// attached.
pub fn cmd_delta(
    config: &RunConfig,
    restriction: Option<u32>,
    trace: bool,
) -> escapedim::Result<CommandOutput> {
    let field = config.build_field()?;
    let tol = config.tolerances.delta;
    let profile = match restriction {
        Some(cap) => critexp::restricted_profile(&field, cap)?,
        None => critexp::profile_of(&field),
    };
    let (est, rows) = critexp::critical_exponent_traced(&profile, tol, trace);
    let payload = envelope(
        config,
        json!({
            "family": field.family,
            "restriction": restriction,
            "delta": estimate_json(&est),
            "delta_value": est.value(),
            "delta_closed_form": critexp::closed_form_delta(&field),
        }),
    );
    let mut out = CommandOutput::text(payload);
    if trace {
        let mut csv = String::from("t,decision,partial_sum_head,tail_bound\n");
        for row in rows {
            csv.push_str(&format!(
                "{:.12},{:?},{:.12e},{:e}\n",
                row.t, row.decision, row.partial_sum_head, row.tail_bound
            ));
        }
        out.files.push((PathBuf::from("delta_trace.csv"), csv.into_bytes()));
    }
    Ok(out)
}

/// `order`: order ρ of the family plus the bound `2Mρ/(2+Mρ)` and the δ it
/// dominates.
pub fn cmd_order(config: &RunConfig) -> escapedim::Result<CommandOutput> {
    let field = config.build_field()?;
    let tol = config.tolerances.delta;
    let order = critexp::order_of_function(&field, tol)?;
    let bound = critexp::bk_upper_bound(field.max_mult, &order.rho);
    let delta = critexp::field_critical_exponent(&field, tol);
    let rho_json = match order.rho {
        RhoValue::Finite(r) => json!(r),
        RhoValue::Infinite => json!("inf"),
    };
    Ok(CommandOutput::text(envelope(
        config,
        json!({
            "family": field.family,
            "rho": rho_json,
            "order_method": format!("{:?}", order.method),
            "upper_bound_2m_rho": bound,
            "delta_value": delta.value(),
            "delta_below_bound": delta.value() <= bound + 1e-3,
        }),
    )))
}

/// `pressure`: CSV pressure curves `t,depth,lo,hi` over a parameter grid,
/// schedules built from the desk conjugated system.
pub fn cmd_pressure(config: &RunConfig, t_grid: &[f64]) -> escapedim::Result<CommandOutput> {
    let field = config.build_field()?;
    let cfg = bracket_config(config);
    let sys = dimest::desk_system(&field, &cfg)?;
    let (lo, hi) = sys.weight_pool();
    let distortion = (2.0 * sys.budget.koebe_k * sys.budget.max_mult as f64).powi(2);
    let family = nais::ContractionFamily::new(lo.clone(), hi, distortion)?;
    let mut csv = String::from("t,depth,lo,hi\n");
    for &t in t_grid {
        match nais::build_schedule(&lo, t, cfg.n_levels) {
            Ok(schedule) => {
                let p = nais::lower_pressure(&family, &schedule, t, cfg.n_levels);
                for (k, (plo, phi)) in p.depth_lo.iter().zip(&p.depth_hi).enumerate() {
                    csv.push_str(&format!("{t:.6},{},{plo:.9},{phi:.9}\n", k + 1));
                }
            }
            Err(_) => {
                csv.push_str(&format!("{t:.6},0,nan,nan\n"));
            }
        }
    }
    let mut out = CommandOutput::text(csv.clone());
    out.files.push((PathBuf::from("pressure.csv"), csv.into_bytes()));
    Ok(out)
}

/// `bracket`: the combined dimension bracket as JSON, plus the `R,t_upper`
/// ladder CSV.
pub fn cmd_bracket(config: &RunConfig) -> escapedim::Result<CommandOutput> {
    let field = config.build_field()?;
    let cfg = bracket_config(config);
    let report = dimest::dimension_bracket(&field, &cfg)?;
    let payload = envelope(
        config,
        json!({
            "family": field.family,
            "delta_closed": report.delta_closed,
            "delta_estimate": estimate_json(&report.delta),
            "bracket_lo": report.bracket_lo,
            "bracket_hi": report.bracket_hi,
            "method_meta": {
                "lower": report.lower.as_ref().map(estimate_json),
                "lower_unavailable": report.lower_unavailable,
                "upper_min": report.upper_min,
                "cover_c": report.cover_constants.c,
                "koebe_k": report.cover_constants.k,
                "desk_r2": cfg.desk_r2,
                "pool_hi": cfg.pool_hi,
                "n_levels": cfg.n_levels,
            },
        }),
    );
    let mut csv = String::from("R,t_upper\n");
    for p in &report.ladder {
        csv.push_str(&format!("{:.6e},{:.6}\n", p.radius, p.t_upper));
    }
    let mut out = CommandOutput::text(payload);
    out.files.push((PathBuf::from("ladder.csv"), csv.into_bytes()));
    Ok(out)
}

/// Window and grid for rendering.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RenderSpec {
    pub re0: f64,
    pub re1: f64,
    pub im0: f64,
    pub im1: f64,
    pub width: usize,
    pub height: usize,
}

/// `render`: per-pixel first-exit map, written as PPM and PNG. Row bands are
/// distributed over the configured worker count; pixel centers are global so
/// the bytes do not depend on the thread count.
pub fn cmd_render(config: &RunConfig, spec: &RenderSpec) -> escapedim::Result<CommandOutput> {
    let field = config.build_field()?;
    let frame = dimest::escape_map_frame(
        (spec.re0, spec.re1),
        (spec.im0, spec.im1),
        spec.width,
        spec.height,
        config.run.radius,
        config.run.horizon,
    );
    let threads = config.effective_threads().min(spec.height.max(1));
    let mut map = frame;
    if threads <= 1 {
        map.steps = dimest::render_escape_rows(&field, &map, 0, spec.height);
    } else {
        let band = spec.height.div_ceil(threads);
        let mut bands: Vec<Vec<u32>> = Vec::new();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for w in 0..threads {
                let y0 = w * band;
                let y1 = ((w + 1) * band).min(spec.height);
                if y0 >= y1 {
                    continue;
                }
                let field_ref = &field;
                let map_ref = &map;
                handles.push(
                    scope.spawn(move || dimest::render_escape_rows(field_ref, map_ref, y0, y1)),
                );
            }
            for h in handles {
                bands.push(h.join().expect("render worker panicked"));
            }
        });
        map.steps = bands.concat();
    }
    let ppm = map.to_ppm();
    let png = encode_png(&map);
    let payload = envelope(
        config,
        json!({
            "family": field.family,
            "render": spec,
            "radius": config.run.radius,
            "horizon": config.run.horizon,
            "pixels": map.steps.len(),
        }),
    );
    let mut out = CommandOutput::text(payload);
    out.files.push((PathBuf::from("escape.ppm"), ppm));
    out.files.push((PathBuf::from("escape.png"), png));
    Ok(out)
}

fn encode_png(map: &dimest::EscapeMap) -> Vec<u8> {
    let ppm = map.to_ppm();
    // Strip the PPM header to recover the raw RGB bytes.
    let header_end = ppm
        .windows(4)
        .position(|w| w == b"255\n")
        .map(|p| p + 4)
        .unwrap_or(0);
    let rgb = &ppm[header_end..];
    let img = image::RgbImage::from_raw(map.width as u32, map.height as u32, rgb.to_vec())
        .expect("pixel buffer matches dimensions");
    let mut png = Vec::new();
    image::DynamicImage::ImageRgb8(img)
        .write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
        .expect("png encodes");
    png
}

/// Diagnostic used by the verify harness: conjugated-system summary at the
/// strict admissible budget.
pub fn strict_system(
    field: &PoleField,
    koebe_k: f64,
    pool_factor: f64,
) -> escapedim::Result<conjugacy::ConjugatedSystem> {
    let budget = conjugacy::admissible_radii(field, koebe_k)?;
    let probe = conjugacy::default_probe(field);
    let cone = conjugacy::select_cone(field, probe)?;
    conjugacy::ConjugatedSystem::build(field.clone(), budget, cone, pool_factor * budget.r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_command_reports_the_closed_form_family() {
        let config = RunConfig::default();
        let out = cmd_delta(&config, None, false).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!(v["tool"], "escapedim");
        let d = v["delta_value"].as_f64().unwrap();
        assert!((d - 0.4).abs() <= 1e-3);
        assert_eq!(v["delta_closed_form"].as_f64().unwrap(), 0.4);
        assert_eq!(v["config_hash"].as_str().unwrap().len(), 16);
    }

    #[test]
    fn delta_trace_emits_csv() {
        let config = RunConfig::default();
        let out = cmd_delta(&config, None, true).unwrap();
        assert_eq!(out.files.len(), 1);
        let csv = String::from_utf8(out.files[0].1.clone()).unwrap();
        assert!(csv.starts_with("t,decision,partial_sum_head,tail_bound\n"));
        assert!(csv.lines().count() > 5);
    }

    #[test]
    fn order_command_for_log_poles_is_infinite() {
        let mut config = RunConfig::default();
        config.family.tag = "log_poles".into();
        let out = cmd_order(&config).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!(v["rho"], "inf");
        assert_eq!(v["upper_bound_2m_rho"].as_f64().unwrap(), 2.0);
    }

    #[test]
    fn pressure_csv_has_expected_shape() {
        let mut config = RunConfig::default();
        config.pipeline.n_levels = 16;
        let out = cmd_pressure(&config, &[0.3, 0.35]).unwrap();
        let lines: Vec<&str> = out.stdout.lines().collect();
        assert_eq!(lines[0], "t,depth,lo,hi");
        assert_eq!(lines.len(), 1 + 2 * 16);
    }

    #[test]
    fn render_small_grid_files() {
        let mut config = RunConfig::default();
        config.run.horizon = 4;
        config.run.radius = 10.0;
        let spec = RenderSpec {
            re0: 10.0,
            re1: 12.0,
            im0: 10.0,
            im1: 12.0,
            width: 16,
            height: 8,
        };
        let out = cmd_render(&config, &spec).unwrap();
        assert_eq!(out.files.len(), 2);
        assert!(out.files[0].1.starts_with(b"P6\n16 8\n255\n"));
        assert_eq!(out.files[0].1.len(), "P6\n16 8\n255\n".len() + 16 * 8 * 3);
        assert!(out.files[1].1.starts_with(&[0x89, b'P', b'N', b'G']));
        // Two-thread render reproduces the single-thread bytes.
        config.run.threads = 2;
        let out2 = cmd_render(&config, &spec).unwrap();
        assert_eq!(out.files[0].1, out2.files[0].1);
    }
}
