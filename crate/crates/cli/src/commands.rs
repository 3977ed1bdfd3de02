use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use phd_core::deformation::{deform_disk, Jet1};
use phd_core::geometry::{nijenhuis, ACStructure, Domain};
use phd_core::injectivity::{find_self_intersections, make_injective, min_speed};
use phd_core::io::{DomainFile, NumericsConfig, StructureFile};
use phd_core::kernel::{CollocationGrid, PolyDiskMap, PolyDiskMapFile};
use phd_core::linalg::{cnorm, to_real, C64};
use phd_core::pseudonorm::{compare_norms, hahn_norm_from, kobayashi_distance, kobayashi_norm, NormContext, NormEstimate};
use phd_core::solver::Solver;
use phd_core::{rng, Error};

use crate::files::{default_report_path, read_json, read_json_arg, sci, write_atomic, write_json};
use crate::{Command, Failure, Summary};

pub const CSV_HEADER: &str = "jet_id,F_hat,S_hat,gap,r_star_F,r_star_S,n";

/// Provenance of one run; everything here is reproducible from the inputs.
struct Run {
    command: &'static str,
    numerics: NumericsConfig,
    seed: Option<u64>,
    params: BTreeMap<&'static str, Value>,
    inputs: BTreeMap<&'static str, String>,
}

impl Run {
    fn new(command: &'static str, config: Option<&Path>) -> Result<Self, Failure> {
        let mut run = Run {
            command,
            numerics: NumericsConfig::default(),
            seed: None,
            params: BTreeMap::new(),
            inputs: BTreeMap::new(),
        };
        if let Some(path) = config {
            run.numerics = run.load("config", path)?;
        }
        Ok(run)
    }

    fn load<T: DeserializeOwned>(&mut self, role: &'static str, path: &Path) -> Result<T, Failure> {
        let input = read_json(path)?;
        self.inputs.insert(role, input.sha256);
        Ok(input.value)
    }

    fn load_arg<T: DeserializeOwned>(&mut self, role: &'static str, arg: &str) -> Result<T, Failure> {
        let input = read_json_arg(arg)?;
        self.inputs.insert(role, input.sha256);
        Ok(input.value)
    }

    fn param(&mut self, name: &'static str, value: impl Serialize) {
        self.params.insert(name, json!(value));
    }

    fn structure(&mut self, path: &Path) -> Result<ACStructure, Failure> {
        let file: StructureFile = self.load("structure", path)?;
        file.build().map_err(|e| Failure::usage(format!("invalid structure in {}: {e}", path.display())))
    }

    fn domain(&mut self, path: &Path) -> Result<Domain, Failure> {
        let file: DomainFile = self.load("domain", path)?;
        file.build().map_err(|e| Failure::usage(format!("invalid domain in {}: {e}", path.display())))
    }

    fn disk(&mut self, role: &'static str, path: &Path) -> Result<PolyDiskMap, Failure> {
        let file: PolyDiskMapFile = self.load(role, path)?;
        PolyDiskMap::try_from(file).map_err(|e| Failure::usage(format!("invalid disk in {}: {e}", path.display())))
    }

    fn point(&mut self, role: &'static str, arg: &str, n: usize) -> Result<Vec<C64>, Failure> {
        let p: Vec<C64> = self.load_arg(role, arg)?;
        if p.len() != n {
            return Err(Failure::usage(format!("{role}: expected {n} complex coordinates, found {}", p.len())));
        }
        Ok(p)
    }

    fn solver(&self) -> Result<Solver, Failure> {
        Solver::new(self.numerics.solver.clone()).map_err(|e| Failure::usage(format!("invalid solver config: {e}")))
    }

    fn meta(&self) -> Value {
        let config = json!({
            "command": self.command,
            "numerics": self.numerics,
            "params": self.params,
            "seed": self.seed,
        });
        let digest = crate::files::sha256_hex(&serde_json::to_vec(&config).expect("config serializes"));
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "rng_algorithm": rng::ALGORITHM,
            "config_sha256": digest,
            "inputs": self.inputs,
        })
    }

    fn report(&self, status: &str, result: Value) -> Value {
        json!({
            "command": self.command,
            "status": status,
            "meta": self.meta(),
            "numerics": self.numerics,
            "params": self.params,
            "result": result,
            "error": Value::Null,
        })
    }

    /// Record a library error in the report file and turn it into a failure.
    fn fail(&self, path: &Path, err: Error) -> Failure {
        let mut report = self.report("failed", Value::Null);
        report["error"] = json!({ "kind": err, "message": err.to_string() });
        let mut failure = Failure::library(&err);
        match write_json(path, &report) {
            Ok(()) => failure.report = Some(path.to_path_buf()),
            Err(io) => failure.message = format!("{}; {}", failure.message, io.message),
        }
        failure
    }
}

fn lowercase<T: std::fmt::Debug>(status: T) -> String {
    format!("{status:?}").to_lowercase()
}

fn estimate_json(e: &NormEstimate) -> Value {
    json!({
        "value": e.value,
        "r_star": e.r_star,
        "seed_kind": e.seed_kind,
        "trace": e.trace,
        "witness": PolyDiskMapFile::from(&e.witness),
    })
}

pub fn run(command: Command) -> Result<Summary, Failure> {
    match command {
        Command::Solve { structure, h, out, report, common } => {
            let mut run = Run::new("solve", common.config.as_deref())?;
            let s = run.structure(&structure)?;
            let h = run.disk("h", &h)?;
            let solver = run.solver()?;
            let report_path = report.unwrap_or_else(|| default_report_path(&out));
            let outcome = solver.solve_from_h(&h, &s).map_err(|e| run.fail(&report_path, e))?;
            let converged = outcome.report.converged();
            if converged {
                write_json(&out, &PolyDiskMapFile::from(&outcome.disk))?;
            }
            let status = lowercase(outcome.report.status);
            write_json(&report_path, &run.report(&status, json!(outcome.report)))?;
            Ok(Summary {
                status,
                key: "residual",
                value: outcome.report.final_residual,
                out: if converged { out } else { report_path },
                code: if converged { 0 } else { 2 },
            })
        }
        Command::Deform { structure, disk, target_jet, epsilon, out, report, common } => {
            let mut run = Run::new("deform", common.config.as_deref())?;
            run.param("epsilon", epsilon);
            let s = run.structure(&structure)?;
            let f0 = run.disk("disk", &disk)?;
            let jet: Jet1 = run.load("target_jet", &target_jet)?;
            let jet = Jet1::new(jet.a, jet.v).map_err(|e| Failure::usage(e.to_string()))?;
            let solver = run.solver()?;
            let report_path = report.unwrap_or_else(|| default_report_path(&out));
            let res = deform_disk(&f0, &s, &jet, epsilon, &solver, &run.numerics.newton)
                .map_err(|e| run.fail(&report_path, e))?;
            write_json(&out, &PolyDiskMapFile::from(&res.disk))?;
            let result = json!({
                "solved_z": res.solved_z,
                "jet_error": res.jet_error,
                "solve": res.report,
                "newton_steps": res.newton_steps,
                "newton_errors": res.newton_errors,
                "base_jet": res.base_jet,
                "distance": res.distance,
                "constant": res.constant,
                "embedded": res.embedded,
            });
            write_json(&report_path, &run.report("converged", result))?;
            Ok(Summary { status: "converged".into(), key: "jet_error", value: res.jet_error, out, code: 0 })
        }
        Command::SelfIntersect { disk, out, common } => {
            let mut run = Run::new("self-intersect", common.config.as_deref())?;
            let f = run.disk("disk", &disk)?;
            let scan = find_self_intersections(&f, &run.numerics.refine);
            let status = if scan.is_empty() { "injective" } else { "self_intersecting" };
            let count = scan.intersections.len();
            let result = json!({ "radius": f.radius(), "min_speed": min_speed(&f), "scan": scan });
            write_json(&out, &run.report(status, result))?;
            Ok(Summary { status: status.into(), key: "count", value: count as f64, out, code: 0 })
        }
        Command::PerturbInjective { disk, structure, delta, epsilon, seed, out, report, common } => {
            let mut run = Run::new("perturb-injective", common.config.as_deref())?;
            run.seed = Some(seed);
            run.param("delta", delta);
            run.param("epsilon", epsilon);
            let f = run.disk("disk", &disk)?;
            let s = run.structure(&structure)?;
            let solver = run.solver()?;
            let report_path = report.unwrap_or_else(|| default_report_path(&out));
            let res = make_injective(&f, &s, delta, epsilon, seed, &solver, &run.numerics.newton, &run.numerics.refine)
                .map_err(|e| run.fail(&report_path, e))?;
            write_json(&out, &PolyDiskMapFile::from(&res.disk))?;
            let result = json!({
                "shift": res.shift,
                "before": res.before,
                "after": res.after,
                "jet_error": res.jet_error,
                "correction": res.correction,
                "min_speed": res.min_speed,
                "solve": res.report,
            });
            write_json(&report_path, &run.report("injective", result))?;
            Ok(Summary { status: "injective".into(), key: "jet_error", value: res.jet_error, out, code: 0 })
        }
        Command::Pseudonorm { domain, structure, point, dir, injective, seed, out, common } => {
            let mut run = Run::new("pseudonorm", common.config.as_deref())?;
            run.param("injective", injective);
            if let Some(seed) = seed {
                run.numerics.norm.seed = seed;
            }
            if injective {
                run.seed = Some(run.numerics.norm.seed);
            }
            let d = run.domain(&domain)?;
            let s = run.structure(&structure)?;
            let p = run.point("point", &point, d.n())?;
            let v = run.point("dir", &dir, d.n())?;
            let solver = run.solver()?;
            let ctx = NormContext {
                domain: &d,
                structure: &s,
                solver: &solver,
                newton: &run.numerics.newton,
                refine: &run.numerics.refine,
                config: &run.numerics.norm,
            };
            let computed = kobayashi_norm(&ctx, &p, &v).and_then(|f| {
                let h = if injective { Some(hahn_norm_from(&ctx, &p, &v, &f)?) } else { None };
                Ok((f, h))
            });
            let (f, h) = computed.map_err(|e| run.fail(&out, e))?;
            let (kind, best) = match &h {
                Some(h) => ("hahn", h),
                None => ("kobayashi", &f),
            };
            let result = json!({
                "kind": kind,
                "value": best.value,
                "estimate": estimate_json(best),
                "kobayashi": if h.is_some() { estimate_json(&f) } else { Value::Null },
            });
            write_json(&out, &run.report("ok", result))?;
            Ok(Summary { status: "ok".into(), key: kind, value: best.value, out, code: 0 })
        }
        Command::Distance { domain, structure, from, to, via, samples, out, common } => {
            let mut run = Run::new("distance", common.config.as_deref())?;
            run.param("samples", samples);
            let d = run.domain(&domain)?;
            let s = run.structure(&structure)?;
            let p = run.point("from", &from, d.n())?;
            let q = run.point("to", &to, d.n())?;
            let vertices = via.iter().map(|arg| run.point("via", arg, d.n())).collect::<Result<Vec<_>, _>>()?;
            let solver = run.solver()?;
            let ctx = NormContext {
                domain: &d,
                structure: &s,
                solver: &solver,
                newton: &run.numerics.newton,
                refine: &run.numerics.refine,
                config: &run.numerics.norm,
            };
            let target = out.clone().unwrap_or_else(|| PathBuf::from("-"));
            let est = match kobayashi_distance(&ctx, &p, &q, &vertices, samples) {
                Ok(est) => est,
                Err(e) => {
                    return Err(match &out {
                        Some(path) => run.fail(path, e),
                        None => Failure::library(&e),
                    })
                }
            };
            if let Some(path) = &out {
                write_json(path, &run.report("ok", json!(est)))?;
            }
            Ok(Summary { status: "ok".into(), key: "distance", value: est.value, out: target, code: 0 })
        }
        Command::Compare { domain, structure, jets, seed, out, report, common } => {
            let mut run = Run::new("compare", common.config.as_deref())?;
            if let Some(seed) = seed {
                run.numerics.norm.seed = seed;
            }
            run.seed = Some(run.numerics.norm.seed);
            let d = run.domain(&domain)?;
            let s = run.structure(&structure)?;
            let jets: Vec<Jet1> = run.load("jets", &jets)?;
            if let Some(bad) = jets.iter().position(|j| j.a.len() != d.n() || j.v.len() != d.n()) {
                return Err(Failure::usage(format!("jet {bad}: expected {} complex coordinates", d.n())));
            }
            let solver = run.solver()?;
            let ctx = NormContext {
                domain: &d,
                structure: &s,
                solver: &solver,
                newton: &run.numerics.newton,
                refine: &run.numerics.refine,
                config: &run.numerics.norm,
            };
            let report_path = report.unwrap_or_else(|| default_report_path(&out));
            let rows = compare_norms(&ctx, &jets).map_err(|e| run.fail(&report_path, e))?;
            let mut csv = String::from(CSV_HEADER);
            csv.push('\n');
            for r in &rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    r.jet_id,
                    sci(r.f_hat),
                    sci(r.s_hat),
                    sci(r.gap),
                    sci(r.r_star_f),
                    sci(r.r_star_s),
                    r.n
                );
            }
            write_atomic(&out, csv.as_bytes())?;
            let max_gap = rows.iter().map(|r| r.gap).fold(0.0, f64::max);
            write_json(&report_path, &run.report("ok", json!({ "rows": rows })))?;
            Ok(Summary { status: "ok".into(), key: "max_gap", value: max_gap, out, code: 0 })
        }
        Command::Nijenhuis { structure, point, x, y, step, out } => {
            let mut run = Run::new("nijenhuis", None)?;
            run.param("step", step);
            let s = run.structure(&structure)?;
            let p = to_real(&run.point("point", &point, s.n())?);
            let x: Vec<f64> = run.load_arg("x", &x)?;
            let y: Vec<f64> = run.load_arg("y", &y)?;
            if x.len() != 2 * s.n() || y.len() != 2 * s.n() {
                return Err(Failure::usage(format!("x and y must have {} real entries", 2 * s.n())));
            }
            let target = out.clone().unwrap_or_else(|| PathBuf::from("-"));
            let value = match nijenhuis(&s, &p, &x, &y, step) {
                Ok(v) => v,
                Err(e) => {
                    return Err(match &out {
                        Some(path) => run.fail(path, e),
                        None => Failure::library(&e),
                    })
                }
            };
            let norm = value.iter().map(|t| t * t).sum::<f64>().sqrt();
            if let Some(path) = &out {
                write_json(path, &run.report("ok", json!({ "value": value, "norm": norm })))?;
            }
            Ok(Summary { status: "ok".into(), key: "norm", value: norm, out: target, code: 0 })
        }
        Command::Report { disk, out, radial, angular, common } => {
            let mut run = Run::new("report", common.config.as_deref())?;
            let f = run.disk("disk", &disk)?;
            let grid = run.numerics.solver.grid;
            let grid = CollocationGrid::new(f.radius(), radial.unwrap_or(grid.radial), angular.unwrap_or(grid.angular))
                .map_err(|e| Failure::usage(e.to_string()))?;
            let mut csv = String::from("x,y");
            for i in 1..=f.n() {
                let _ = write!(csv, ",Re f{i},Im f{i}");
            }
            csv.push('\n');
            let points = std::iter::once(C64::default()).chain(grid.nodes()).chain(grid.boundary_ring());
            let mut sup = 0.0f64;
            for z in points {
                let w = f.eval_unchecked(z);
                sup = sup.max(cnorm(&w));
                let _ = write!(csv, "{},{}", sci(z.re), sci(z.im));
                for c in &w {
                    let _ = write!(csv, ",{},{}", sci(c.re), sci(c.im));
                }
                csv.push('\n');
            }
            write_atomic(&out, csv.as_bytes())?;
            Ok(Summary { status: "ok".into(), key: "sup_norm", value: sup, out, code: 0 })
        }
    }
}
