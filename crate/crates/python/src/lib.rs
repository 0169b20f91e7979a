//! Python bindings: fields, extraction, meshes and metrics.

use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dualmesh::field::weights::load_weights as read_weights;
use dualmesh::field_spec::FieldSpec;
use dualmesh::io::{read_mesh, write_mesh};
use dualmesh::metrics::{self, DEFAULT_SAMPLES, DEFAULT_THRESHOLD};
use dualmesh::{ExtractConfig, IndexedMesh, Point3, ScalarField};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_dict<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyDict>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))?.cast_into::<PyDict>().map_err(Into::into)
}

/// A distance source built from a field spec such as `analytic:sphere:0.5`,
/// `mesh:bunny.obj`, `mlp:net.udfw` or `noisy:7:analytic:torus:0.5:0.2`.
#[pyclass(frozen, name = "Field")]
struct PyField {
    spec: String,
    field: Arc<dyn ScalarField>,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        let parsed: FieldSpec = spec.parse().map_err(value_error)?;
        let field = parsed.build().map_err(value_error)?;
        Ok(Self {
            spec: spec.to_owned(),
            field: Arc::from(field),
        })
    }

    #[getter]
    fn spec(&self) -> &str {
        &self.spec
    }

    /// Distances and gradients at `points`, a sequence of xyz triples.
    fn eval(&self, py: Python<'_>, points: Vec<[f64; 3]>) -> PyResult<(Vec<f64>, Vec<[f64; 3]>)> {
        let points: Vec<Point3> = points.into_iter().map(Point3::from).collect();
        let field = self.field.clone();
        let r = py.detach(move || field.eval_batch(&points)).map_err(value_error)?;
        Ok((r.distances, r.gradients.iter().map(|g| [g.x, g.y, g.z]).collect()))
    }

    fn __repr__(&self) -> String {
        format!("Field({:?})", self.spec)
    }
}

#[pyclass(frozen, name = "Mesh")]
struct PyMesh {
    mesh: IndexedMesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[u32; 3]>) -> PyResult<Self> {
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&v| v as usize >= vertices.len())) {
            return Err(value_error(format!("triangle {t:?} indexes past {} vertices", vertices.len())));
        }
        Ok(Self {
            mesh: IndexedMesh::new(vertices.into_iter().map(Point3::from).collect(), triangles),
        })
    }

    /// Reads OBJ or PLY by extension.
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        let mesh = read_mesh(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(Self { mesh })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        write_mesh(&self.mesh, path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[getter]
    fn vertices(&self) -> Vec<[f64; 3]> {
        self.mesh.vertices.iter().map(|p| [p.x, p.y, p.z]).collect()
    }

    #[getter]
    fn triangles(&self) -> Vec<[u32; 3]> {
        self.mesh.triangles.clone()
    }

    fn area(&self) -> f64 {
        self.mesh.area()
    }

    fn boundary_edge_count(&self) -> usize {
        self.mesh.boundary_edges().len()
    }

    fn max_edge_degree(&self) -> usize {
        self.mesh.max_edge_degree()
    }

    fn euler_characteristic(&self) -> i64 {
        self.mesh.euler_characteristic()
    }

    fn component_count(&self) -> usize {
        self.mesh.component_count()
    }

    fn __len__(&self) -> usize {
        self.mesh.triangles.len()
    }

    fn __repr__(&self) -> String {
        format!("Mesh({} vertices, {} triangles)", self.mesh.vertices.len(), self.mesh.triangles.len())
    }
}

/// Extracts a mesh over `[-1, 1]³`; returns the mesh and the run report.
#[pyfunction]
#[pyo3(signature = (field, max_depth = 7, manifold = false, sigma_ratio = None, normal_tolerance_deg = None))]
fn extract<'py>(
    py: Python<'py>,
    field: &PyField,
    max_depth: u32,
    manifold: bool,
    sigma_ratio: Option<f64>,
    normal_tolerance_deg: Option<f64>,
) -> PyResult<(PyMesh, Bound<'py, PyDict>)> {
    let mut config = ExtractConfig {
        max_depth,
        manifold,
        ..Default::default()
    };
    if let Some(s) = sigma_ratio {
        config.sigma_ratio = s;
    }
    if let Some(t) = normal_tolerance_deg {
        config.normal_tolerance_deg = t;
    }
    let f = field.field.clone();
    let run = py.detach(move || dualmesh::extract(&*f, &config)).map_err(value_error)?;
    let report = to_dict(py, &run.report)?;
    Ok((PyMesh { mesh: run.mesh }, report))
}

/// Chamfer, F-score and Hausdorff of `candidate` against `reference`.
#[pyfunction]
#[pyo3(signature = (candidate, reference, samples = DEFAULT_SAMPLES, threshold = DEFAULT_THRESHOLD, seed = 0))]
fn evaluate<'py>(
    py: Python<'py>,
    candidate: &PyMesh,
    reference: &PyMesh,
    samples: usize,
    threshold: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let report = py
        .detach(|| metrics::evaluate(&candidate.mesh, &reference.mesh, samples, threshold, seed))
        .map_err(value_error)?;
    to_dict(py, &report)
}

/// Validates a UDFW file and returns it as a field.
#[pyfunction]
fn load_weights(path: &str) -> PyResult<PyField> {
    let net = read_weights(path).map_err(value_error)?;
    Ok(PyField {
        spec: format!("mlp:{path}"),
        field: Arc::new(net),
    })
}

#[pymodule]
fn pydualmesh(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyField>()?;
    m.add_class::<PyMesh>()?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(load_weights, m)?)?;
    Ok(())
}
