//! Plain-text model files.
//!
//! ```text
//! gazelab-model 1
//! kind=knn
//! k=3
//! @rows 4 2
//! 0.1 0.2
//! ...
//! ```
//!
//! Header lines are `key=value`; a block starts with `@name rows cols`
//! followed by that many whitespace-separated rows. Floats use Rust's
//! shortest round-trip formatting, so a reloaded model predicts
//! bit-identically.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::forest::{Node, Tree};
use super::{ForestModel, KnnModel, LinearModel, MlpModel, MlpTask, Model, Penalty, SvmModel};
use crate::error::{Error, Result};
use crate::features::Standardizer;
use crate::learn::svm::PairMachine;

const MAGIC: &str = "gazelab-model";
const VERSION: u32 = 1;

/// A model with what is needed to apply it to raw feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: Model,
    pub columns: Vec<String>,
    pub class_names: Vec<String>,
    /// Applied to input rows before prediction.
    pub standardizer: Option<Standardizer>,
    /// Applied in reverse to regression outputs.
    pub target_scale: Option<(f64, f64)>,
}

#[derive(Default)]
struct Doc {
    header: BTreeMap<String, String>,
    blocks: BTreeMap<String, Vec<Vec<f64>>>,
}

impl Doc {
    fn set(&mut self, k: &str, v: impl ToString) {
        self.header.insert(k.to_string(), v.to_string());
    }

    fn block(&mut self, name: &str, rows: Vec<Vec<f64>>) {
        self.blocks.insert(name.to_string(), rows);
    }

    fn get(&self, k: &str) -> Result<&str> {
        self.header
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| Error::data(format!("model file lacks '{k}'")))
    }

    fn num<T: std::str::FromStr>(&self, k: &str) -> Result<T> {
        self.get(k)?
            .parse()
            .map_err(|_| Error::data(format!("model file: bad value for '{k}'")))
    }

    fn take(&mut self, name: &str) -> Result<Vec<Vec<f64>>> {
        self.blocks
            .remove(name)
            .ok_or_else(|| Error::data(format!("model file lacks block '{name}'")))
    }

    fn render(&self) -> String {
        let mut s = format!("{MAGIC} {VERSION}\n");
        for (k, v) in &self.header {
            let _ = writeln!(s, "{k}={v}");
        }
        for (name, rows) in &self.blocks {
            let cols = rows.first().map_or(0, Vec::len);
            let _ = writeln!(s, "@{name} {} {cols}", rows.len());
            for r in rows {
                let line: Vec<String> = r.iter().map(f64::to_string).collect();
                let _ = writeln!(s, "{}", line.join(" "));
            }
        }
        s
    }

    fn parse(text: &str) -> Result<Doc> {
        let mut lines = text.lines();
        let first = lines.next().unwrap_or("");
        let mut parts = first.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(Error::data("not a gazelab model file"));
        }
        let v: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::data("model file has no version"))?;
        if v != VERSION {
            return Err(Error::data(format!("unsupported model file version {v}")));
        }
        let mut doc = Doc::default();
        while let Some(line) = lines.next() {
            if line.trim().is_empty() {
                continue;
            }
            if let Some(spec) = line.strip_prefix('@') {
                let f: Vec<&str> = spec.split_whitespace().collect();
                let (name, rows, cols) = match f.as_slice() {
                    [n, r, c] => (
                        n.to_string(),
                        r.parse::<usize>()
                            .map_err(|_| Error::data("bad block row count"))?,
                        c.parse::<usize>()
                            .map_err(|_| Error::data("bad block column count"))?,
                    ),
                    _ => return Err(Error::data(format!("bad block header '{line}'"))),
                };
                let mut block = Vec::with_capacity(rows);
                for _ in 0..rows {
                    let l = lines
                        .next()
                        .ok_or_else(|| Error::data(format!("block '{name}' is truncated")))?;
                    let row = l
                        .split_whitespace()
                        .map(|t| {
                            t.parse::<f64>()
                                .map_err(|_| Error::data(format!("bad number '{t}' in '{name}'")))
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    if row.len() != cols {
                        return Err(Error::data(format!(
                            "block '{name}' row has {} values, expected {cols}",
                            row.len()
                        )));
                    }
                    block.push(row);
                }
                doc.blocks.insert(name, block);
            } else if let Some((k, v)) = line.split_once('=') {
                doc.header
                    .insert(k.trim().to_string(), v.trim().to_string());
            } else {
                return Err(Error::data(format!("unexpected line '{line}'")));
            }
        }
        Ok(doc)
    }
}

fn join(v: &[String]) -> String {
    v.join(",")
}

fn split(s: &str) -> Vec<String> {
    if s.is_empty() {
        Vec::new()
    } else {
        s.split(',').map(String::from).collect()
    }
}

fn usize_row(v: &[usize]) -> Vec<f64> {
    v.iter().map(|x| *x as f64).collect()
}

fn to_usize(v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::data(format!(
            "expected a non-negative integer, got {v}"
        )))
    }
}

fn encode_model(m: &Model, d: &mut Doc) {
    d.set("kind", m.kind());
    match m {
        Model::Knn(k) => {
            d.set("k", k.k);
            d.set("n_classes", k.n_classes);
            d.block("rows", k.rows.clone());
            d.block("labels", vec![usize_row(&k.labels)]);
        }
        Model::Svm(s) => {
            d.set("c", s.c);
            d.set("gamma", s.gamma);
            d.set("n_classes", s.n_classes);
            d.set("machines", s.machines.len());
            for (i, pm) in s.machines.iter().enumerate() {
                d.block(
                    &format!("m{i}_meta"),
                    vec![vec![pm.pos as f64, pm.neg as f64, pm.bias]],
                );
                d.block(&format!("m{i}_coef"), vec![pm.coef.clone()]);
                d.block(&format!("m{i}_sv"), pm.support.clone());
            }
        }
        Model::Mlp(n) => {
            d.set(
                "sizes",
                n.sizes
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            );
            d.set(
                "task",
                match n.task {
                    MlpTask::Classifier { .. } => "classifier",
                    MlpTask::Regressor => "regressor",
                },
            );
            d.set("l2_alpha", n.l2_alpha);
            d.block("params", vec![n.params.clone()]);
        }
        Model::Forest(f) => {
            d.set("n_classes", f.n_classes);
            d.set("n_features", f.n_features);
            d.set("trees", f.trees.len());
            d.block("importances", vec![f.importances.clone()]);
            for (i, t) in f.trees.iter().enumerate() {
                // leaf: [-1, class, 0, 0]; split: [feature, threshold, left, right]
                let rows = t
                    .nodes
                    .iter()
                    .map(|n| match n {
                        Node::Leaf { class } => vec![-1.0, *class as f64, 0.0, 0.0],
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => vec![*feature as f64, *threshold, *left as f64, *right as f64],
                    })
                    .collect();
                d.block(&format!("t{i}"), rows);
            }
        }
        Model::Linear(l) => {
            let (z1, z2) = l.penalty.weights();
            d.set("penalty", l.penalty.name());
            d.set("z1", z1);
            d.set("z2", z2);
            d.set("degree", l.degree);
            d.set("n_inputs", l.n_inputs);
            d.set("intercept", l.intercept);
            d.block("weights", vec![l.weights.clone()]);
        }
    }
}

fn single_row(d: &mut Doc, name: &str) -> Result<Vec<f64>> {
    let mut b = d.take(name)?;
    if b.len() != 1 {
        return Err(Error::data(format!("block '{name}' must have one row")));
    }
    Ok(b.remove(0))
}

fn decode_model(d: &mut Doc) -> Result<Model> {
    let kind = d.get("kind")?.to_string();
    Ok(match kind.as_str() {
        "knn" => Model::Knn(KnnModel {
            k: d.num("k")?,
            n_classes: d.num("n_classes")?,
            rows: d.take("rows")?,
            labels: single_row(d, "labels")?
                .into_iter()
                .map(to_usize)
                .collect::<Result<_>>()?,
        }),
        "svm" => {
            let n: usize = d.num("machines")?;
            let mut machines = Vec::with_capacity(n);
            for i in 0..n {
                let meta = single_row(d, &format!("m{i}_meta"))?;
                if meta.len() != 3 {
                    return Err(Error::data("bad SVM machine header"));
                }
                machines.push(PairMachine {
                    pos: to_usize(meta[0])?,
                    neg: to_usize(meta[1])?,
                    bias: meta[2],
                    coef: single_row(d, &format!("m{i}_coef"))?,
                    support: d.take(&format!("m{i}_sv"))?,
                });
            }
            Model::Svm(SvmModel {
                c: d.num("c")?,
                gamma: d.num("gamma")?,
                n_classes: d.num("n_classes")?,
                machines,
            })
        }
        "mlp" => {
            let sizes = d
                .get("sizes")?
                .split(',')
                .map(|s| s.parse::<usize>().map_err(|_| Error::data("bad MLP sizes")))
                .collect::<Result<Vec<_>>>()?;
            let task = match d.get("task")? {
                "classifier" => MlpTask::Classifier {
                    n_classes: *sizes.last().ok_or_else(|| Error::data("empty MLP sizes"))?,
                },
                "regressor" => MlpTask::Regressor,
                other => return Err(Error::data(format!("unknown MLP task '{other}'"))),
            };
            Model::Mlp(MlpModel {
                sizes,
                task,
                l2_alpha: d.num("l2_alpha")?,
                params: single_row(d, "params")?,
                loss_curve: Vec::new(),
            })
        }
        "forest" => {
            let n: usize = d.num("trees")?;
            let mut trees = Vec::with_capacity(n);
            for i in 0..n {
                let nodes = d
                    .take(&format!("t{i}"))?
                    .into_iter()
                    .map(|r| {
                        if r.len() != 4 {
                            return Err(Error::data("bad tree node"));
                        }
                        if r[0] < 0.0 {
                            Ok(Node::Leaf {
                                class: to_usize(r[1])?,
                            })
                        } else {
                            Ok(Node::Split {
                                feature: to_usize(r[0])?,
                                threshold: r[1],
                                left: to_usize(r[2])?,
                                right: to_usize(r[3])?,
                            })
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                trees.push(Tree { nodes });
            }
            Model::Forest(ForestModel {
                trees,
                n_classes: d.num("n_classes")?,
                n_features: d.num("n_features")?,
                importances: single_row(d, "importances")?,
            })
        }
        "linear" => Model::Linear(LinearModel {
            penalty: Penalty::from_weights(d.get("penalty")?, d.num("z1")?, d.num("z2")?)?,
            degree: d.num("degree")?,
            n_inputs: d.num("n_inputs")?,
            intercept: d.num("intercept")?,
            weights: single_row(d, "weights")?,
        }),
        other => return Err(Error::data(format!("unknown model kind '{other}'"))),
    })
}

pub fn bundle_to_string(b: &ModelBundle) -> String {
    let mut d = Doc::default();
    encode_model(&b.model, &mut d);
    d.set("columns", join(&b.columns));
    d.set("classes", join(&b.class_names));
    if let Some(s) = &b.standardizer {
        d.block("std_mean", vec![s.means.clone()]);
        d.block("std_sd", vec![s.sds.clone()]);
    }
    if let Some((m, s)) = b.target_scale {
        d.set("target_mean", m);
        d.set("target_sd", s);
    }
    d.render()
}

pub fn parse_bundle(text: &str) -> Result<ModelBundle> {
    let mut d = Doc::parse(text)?;
    let model = decode_model(&mut d)?;
    let standardizer = if d.blocks.contains_key("std_mean") {
        Some(Standardizer {
            means: single_row(&mut d, "std_mean")?,
            sds: single_row(&mut d, "std_sd")?,
        })
    } else {
        None
    };
    let target_scale = if d.header.contains_key("target_mean") {
        Some((d.num("target_mean")?, d.num("target_sd")?))
    } else {
        None
    };
    Ok(ModelBundle {
        model,
        columns: split(d.get("columns").unwrap_or("")),
        class_names: split(d.get("classes").unwrap_or("")),
        standardizer,
        target_scale,
    })
}

pub fn save_bundle(b: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, bundle_to_string(b)).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ModelBundle> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bundle(&text)
}
