//! Python bindings: build or load an engine, train it on labeled pairs, rank
//! names and generate synthetic pairs.

use std::path::PathBuf;

use namelink_core::evaluation::hit_at_k as core_hit_at_k;
use namelink_core::{
    generate_pairs as core_generate_pairs, Corpus, DocId, Engine, EngineConfig, EquivalenceTable, GenParams,
    IndexSnapshot, LabeledPair, Query, TrParams, Variant,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: namelink_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_variant(v: Option<&str>, default: Variant) -> PyResult<Variant> {
    v.map(str::parse)
        .transpose()
        .map_err(py_err)
        .map(|v| v.unwrap_or(default))
}

fn corpus_of(records: Vec<(String, String)>) -> PyResult<Corpus> {
    Corpus::from_records(records).map_err(py_err)
}

fn pairs_of(pairs: Vec<(String, String)>) -> PyResult<Vec<LabeledPair>> {
    pairs
        .into_iter()
        .map(|(q, d)| Ok(LabeledPair::positive(Query::new(q), DocId::new(d).map_err(py_err)?)))
        .collect()
}

/// Lowercased NFKC alphanumeric terms of `text`.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    namelink_core::tokenize(text)
        .into_iter()
        .map(|t| t.to_string())
        .collect()
}

#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct Match {
    doc_id: String,
    name: String,
    fraction: f64,
    probability: Option<f64>,
}

#[pymethods]
impl Match {
    fn __repr__(&self) -> String {
        format!(
            "Match(doc_id={:?}, name={:?}, fraction={:.4}, probability={:?})",
            self.doc_id, self.name, self.fraction, self.probability
        )
    }
}

#[pyclass(name = "Engine", frozen)]
struct PyEngine {
    inner: Engine,
}

#[pymethods]
impl PyEngine {
    /// An untrained engine over `(doc_id, name)` records.
    #[staticmethod]
    fn build(records: Vec<(String, String)>) -> PyResult<PyEngine> {
        Ok(PyEngine {
            inner: Engine::build(corpus_of(records)?, 1).map_err(py_err)?,
        })
    }

    /// Learns translations and weights from positive `(query, doc_id)` pairs.
    #[staticmethod]
    #[pyo3(signature = (records, pairs, c1=1.0, c=5.0, tau=0.7, negatives=5, seed=0))]
    fn train(
        records: Vec<(String, String)>,
        pairs: Vec<(String, String)>,
        c1: f64,
        c: f64,
        tau: f64,
        negatives: usize,
        seed: u64,
    ) -> PyResult<PyEngine> {
        let mut config = EngineConfig {
            tr: TrParams { c1, c, tau },
            ..EngineConfig::default()
        };
        config.train.negatives_per_query = negatives;
        config.train.seed = seed;
        let (inner, _) = Engine::train(corpus_of(records)?, &pairs_of(pairs)?, &config, 1).map_err(py_err)?;
        Ok(PyEngine { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PyEngine> {
        Ok(PyEngine {
            inner: Engine::load(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    #[getter]
    fn version(&self) -> u64 {
        self.inner.version()
    }

    fn __len__(&self) -> usize {
        self.inner.corpus().len()
    }

    /// `(w0, w1)` of a variant, or None if it was not fitted.
    #[pyo3(signature = (variant=None))]
    fn weights(&self, variant: Option<&str>) -> PyResult<Option<(f64, f64)>> {
        let v = parse_variant(variant, self.inner.default_variant())?;
        Ok(self.inner.weights(v).map(|w| (w.w0, w.w1)))
    }

    #[pyo3(signature = (query, k=10, variant=None))]
    fn rank(&self, py: Python<'_>, query: &str, k: usize, variant: Option<&str>) -> PyResult<Vec<Match>> {
        let v = parse_variant(variant, self.inner.default_variant())?;
        let q = Query::new(query);
        let results = py.detach(|| self.inner.rank(&q, k, v)).map_err(py_err)?;
        Ok(results
            .into_iter()
            .map(|r| Match {
                doc_id: r.doc_id.to_string(),
                name: self.inner.corpus().doc(r.doc_idx).raw().to_string(),
                fraction: r.fraction,
                probability: r.probability,
            })
            .collect())
    }

    #[pyo3(signature = (query, doc_id, variant=None))]
    fn fraction(&self, query: &str, doc_id: &str, variant: Option<&str>) -> PyResult<f64> {
        let v = parse_variant(variant, self.inner.default_variant())?;
        Ok(self
            .inner
            .fraction(&Query::new(query), doc_id, v)
            .map_err(py_err)?
            .fraction)
    }
}

/// Perturbed `(query, doc_id)` pairs for each record. Keyword arguments
/// override generator parameters such as `p_typo` or `seed`.
#[pyfunction]
#[pyo3(signature = (records, equivalences=Vec::new(), seed=0, **params))]
fn generate_pairs(
    records: Vec<(String, String)>,
    equivalences: Vec<Vec<String>>,
    seed: u64,
    params: Option<&Bound<'_, pyo3::types::PyDict>>,
) -> PyResult<Vec<(String, String)>> {
    let corpus = corpus_of(records)?;
    let index = IndexSnapshot::build(&corpus).map_err(py_err)?;
    let equiv = EquivalenceTable::from_groups(equivalences).map_err(py_err)?;
    let mut gen = GenParams {
        seed,
        ..GenParams::default()
    };
    if let Some(params) = params {
        for (k, v) in params.iter() {
            gen = gen.with(&k.extract::<String>()?, v.extract::<f64>()?).map_err(py_err)?;
        }
    }
    let pairs = core_generate_pairs(&corpus, &index, &gen, &equiv).map_err(py_err)?;
    Ok(pairs
        .into_iter()
        .map(|p| (p.query.raw().to_string(), p.doc_id.to_string()))
        .collect())
}

/// Percentage of queries whose gold id appears in the first `k` results.
#[pyfunction]
fn hit_at_k(results: Vec<Vec<String>>, gold: Vec<String>, k: usize) -> PyResult<f64> {
    let ids = |xs: Vec<String>| xs.into_iter().map(DocId::new).collect::<Result<Vec<_>, _>>();
    let results = results
        .into_iter()
        .map(ids)
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    core_hit_at_k(&results, &ids(gold).map_err(py_err)?, k).map_err(py_err)
}

#[pymodule]
fn namelink(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(generate_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(hit_at_k, m)?)?;
    m.add_class::<PyEngine>()?;
    m.add_class::<Match>()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_defaults_and_errors() {
        assert_eq!(parse_variant(None, Variant::Tfidf).unwrap(), Variant::Tfidf);
        assert_eq!(
            parse_variant(Some("tfidf+tr"), Variant::Tfidf).unwrap(),
            Variant::TfidfTr
        );
        assert!(parse_variant(Some("bm25"), Variant::Tfidf).is_err());
    }

    #[test]
    fn pairs_are_positive_and_validated() {
        let p = pairs_of(vec![("acme".into(), "d1".into())]).unwrap();
        assert!(p[0].is_positive());
        assert!(pairs_of(vec![("acme".into(), "a\tb".into())]).is_err());
        assert_eq!(tokenize("Acme-Pizza"), ["acme", "pizza"]);
    }
}
