use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trace_core::graph::{
    adjacency_operator, estrada_index_exact, parse_edge_list, triangle_count_exact, Graph,
    ESTRADA_NODE_LIMIT, TRIANGLE_NODE_LIMIT,
};
use trace_core::matfunc::{exp_operator, power_operator, shifted_log_operator};
use trace_core::synth::{
    gaussian_kernel_matrix, parse_points, power_law_matrix, synthetic_2d_points, SpectrumSpec,
};
use trace_core::{exact_trace, LinearOperator};

use crate::error::{spec_error, BenchError, Result};
use crate::spec::MatrixSource;
use crate::sweep::derive_seed;

// keeps the matrix stream apart from the trial streams
const SOURCE_STREAM: u64 = u64::MAX;

/// An operator together with its true trace.
#[derive(Clone, Debug)]
pub struct PreparedSource {
    pub operator: LinearOperator,
    pub truth: f64,
    /// Things worth telling the user, e.g. a cache that could not be written.
    pub notes: Vec<String>,
}

impl PreparedSource {
    pub fn new(operator: LinearOperator, truth: f64) -> Result<Self> {
        if !truth.is_finite() || truth == 0.0 {
            return Err(spec_error(format!(
                "reference trace is {truth}; relative error is undefined"
            )));
        }
        Ok(Self {
            operator,
            truth,
            notes: Vec::new(),
        })
    }
}

/// Builds the operator and its exact trace. Synthetic sources draw from
/// `seed`, so a sweep is reproducible end to end.
pub fn prepare_source(source: &MatrixSource, seed: u64) -> Result<PreparedSource> {
    source.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[SOURCE_STREAM]));
    match source {
        MatrixSource::PowerLaw { c, d } => {
            let spec = SpectrumSpec::new(*d, *c)?;
            let m = power_law_matrix(spec, &mut rng)?;
            let truth = m.matrix.trace();
            PreparedSource::new(m.operator, truth)
        }
        MatrixSource::KernelLogdet {
            n,
            gamma,
            lambda,
            iterations,
            points,
        } => {
            let pts = match points {
                Some(path) => parse_points(&read(path)?)?,
                None => synthetic_2d_points(*n, &mut rng)?,
            };
            let b = gaussian_kernel_matrix(&pts, *gamma)?;
            let eig = SymmetricEigen::new(b.clone()).eigenvalues;
            // B is PSD; rounding can leave tiny negative eigenvalues
            let truth = eig.iter().map(|l| (l.max(0.0) + lambda).ln()).sum();
            let op = shifted_log_operator(LinearOperator::dense(b)?, *lambda, *iterations)?;
            PreparedSource::new(op, truth)
        }
        MatrixSource::GraphEstrada { path, iterations } => {
            let g = load_graph(path)?;
            let op = exp_operator(adjacency_operator(&g)?, *iterations)?;
            if g.node_count() <= ESTRADA_NODE_LIMIT {
                let truth = estrada_index_exact(&g)?;
                return PreparedSource::new(op, truth);
            }
            let cache = cache_path(path, &format!("estrada-{iterations}"));
            cached_reference(op, &g, &cache)
        }
        MatrixSource::GraphTriangles { path, allow_large } => {
            let g = load_graph(path)?;
            let op = power_operator(adjacency_operator(&g)?, 3)?;
            if *allow_large || g.node_count() <= TRIANGLE_NODE_LIMIT {
                let triangles = triangle_count_exact(&g, *allow_large)?;
                return PreparedSource::new(op, 6.0 * triangles as f64);
            }
            let cache = cache_path(path, "cube");
            cached_reference(op, &g, &cache)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| BenchError::File {
        path: path.display().to_string(),
        source,
    })
}

fn load_graph(path: &Path) -> Result<Graph> {
    Ok(parse_edge_list(&read(path)?)?.graph)
}

fn cache_path(dataset: &Path, tag: &str) -> PathBuf {
    let mut name = dataset.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".{tag}.trace"));
    dataset.with_file_name(name)
}

/// `exact_trace` of `op`, stored beside the dataset so it is paid once.
/// The cache is keyed on node and edge counts.
fn cached_reference(op: LinearOperator, g: &Graph, cache: &Path) -> Result<PreparedSource> {
    let key = format!("nodes={} edges={}", g.node_count(), g.edge_count());
    if let Ok(text) = fs::read_to_string(cache) {
        if let Some(v) = text
            .strip_prefix(&key)
            .and_then(|rest| rest.trim().strip_prefix("trace="))
            .and_then(|v| v.parse::<f64>().ok())
        {
            return PreparedSource::new(op, v);
        }
    }
    let truth = exact_trace(&op.fork())?.value;
    let mut prepared = PreparedSource::new(op, truth)?;
    if let Err(e) = fs::write(cache, format!("{key} trace={truth:.17e}\n")) {
        prepared
            .notes
            .push(format!("could not write {}: {e}", cache.display()));
    }
    Ok(prepared)
}
