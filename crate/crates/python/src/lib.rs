//! Python bindings. Randomized operations take a seed and use the same
//! per-stage streams as the command-line tool, so a given seed produces the
//! same plan from either side.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mixseg3d_core::config::RunConfig;
use mixseg3d_core::geometry::{self, RigidAugmentation};
use mixseg3d_core::io;
use mixseg3d_core::lasermix::{self, LaserMixConfig};
use mixseg3d_core::metrics::{self, ConfusionMatrix};
use mixseg3d_core::model::{VoxelMajorityModel, DEFAULT_SEARCH_RADIUS};
use mixseg3d_core::pipeline::{self, stage_rng, MixSources, Stage, Strategy};
use mixseg3d_core::polarmix::{self, PolarMixConfig};
use mixseg3d_core::scene::{self, SceneSpec};
use mixseg3d_core::tta::{self, Predictor};
use mixseg3d_core::{ClassId, Error};

fn py_err(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        3 => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_labels(v: Vec<u32>) -> Vec<ClassId> {
    v.into_iter().map(ClassId).collect()
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

#[pyclass(name = "PointCloud", module = "mixseg3d", frozen, from_py_object)]
#[derive(Clone)]
struct PyPointCloud(geometry::PointCloud);

#[pymethods]
impl PyPointCloud {
    #[new]
    #[pyo3(signature = (coords, intensity=None, labels=None))]
    fn new(
        coords: Vec<[f64; 3]>,
        intensity: Option<Vec<f32>>,
        labels: Option<Vec<u32>>,
    ) -> PyResult<Self> {
        let intensity = intensity.unwrap_or_else(|| vec![0.0; coords.len()]);
        geometry::PointCloud::new(coords, intensity, labels.map(to_labels))
            .map(Self)
            .map_err(py_err)
    }

    /// Reads `scan` (and `labels`, if given) in the binary scan format.
    #[staticmethod]
    #[pyo3(signature = (scan, labels=None))]
    fn read(scan: std::path::PathBuf, labels: Option<std::path::PathBuf>) -> PyResult<Self> {
        let cloud = match labels {
            Some(l) => io::read_labeled_scan(&scan, &l, &io::ClassMap::default()),
            None => io::read_scan(&scan),
        };
        cloud.map(Self).map_err(py_err)
    }

    #[pyo3(signature = (scan, labels=None))]
    fn write(&self, scan: std::path::PathBuf, labels: Option<std::path::PathBuf>) -> PyResult<()> {
        match labels {
            Some(l) => io::write_labeled_scan(&self.0, &scan, &l),
            None => io::write_scan(&self.0, &scan),
        }
        .map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "PointCloud(n={}, labeled={})",
            self.0.len(),
            self.0.is_labeled()
        )
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    #[getter]
    fn coords(&self) -> Vec<[f64; 3]> {
        self.0.coords().to_vec()
    }

    #[getter]
    fn intensity(&self) -> Vec<f32> {
        self.0.intensity().to_vec()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<u32>> {
        self.0.labels().map(|l| l.iter().map(|c| c.0).collect())
    }

    /// Inclination of every point, radians.
    fn inclination(&self) -> Vec<f64> {
        geometry::inclination(self.0.coords())
    }

    /// Azimuth of every point in [0, 2*pi).
    fn azimuth(&self) -> Vec<f64> {
        geometry::azimuth(self.0.coords())
    }

    /// True when both clouds hold the same multiset of points.
    fn same_points(&self, other: &Self) -> bool {
        self.0.multiset_eq(&other.0)
    }
}

#[pyclass(name = "Augmentation", module = "mixseg3d", frozen, from_py_object)]
#[derive(Clone)]
struct PyAugmentation(RigidAugmentation);

#[pymethods]
impl PyAugmentation {
    #[new]
    #[pyo3(signature = (yaw=0.0, scale=1.0, flip_x=false, flip_y=false, shift=[0.0; 3]))]
    fn new(yaw: f64, scale: f64, flip_x: bool, flip_y: bool, shift: [f64; 3]) -> PyResult<Self> {
        let a = RigidAugmentation {
            yaw,
            scale,
            flip_x,
            flip_y,
            shift,
        };
        a.validate().map_err(py_err)?;
        Ok(Self(a))
    }

    fn apply(&self, cloud: &PyPointCloud) -> PyResult<PyPointCloud> {
        geometry::apply_augmentation(&cloud.0, &self.0)
            .map(PyPointCloud)
            .map_err(py_err)
    }

    fn inverse(&self) -> Self {
        Self(self.0.inverse())
    }

    fn __repr__(&self) -> String {
        json(&self.0)
    }
}

/// Labeled synthetic street scene.
#[pyfunction]
#[pyo3(signature = (seed, num_points=20_000))]
fn generate_scene(seed: u64, num_points: usize) -> PyResult<PyPointCloud> {
    scene::generate(&SceneSpec {
        seed,
        num_points,
        ..Default::default()
    })
    .map(PyPointCloud)
    .map_err(py_err)
}

/// Returns both LaserMix outputs and the plan as JSON.
#[pyfunction]
#[pyo3(signature = (a, b, seed, bin_choices=None))]
fn laser_mix(
    a: &PyPointCloud,
    b: &PyPointCloud,
    seed: u64,
    bin_choices: Option<Vec<usize>>,
) -> PyResult<(PyPointCloud, PyPointCloud, String)> {
    let mut config = LaserMixConfig::default();
    if let Some(c) = bin_choices {
        config.bin_choices = c;
    }
    let plan = lasermix::make_plan(&a.0, &b.0, &config, &mut stage_rng(seed, Stage::LaserMix))
        .map_err(py_err)?;
    let (o1, o2) = lasermix::laser_mix(&a.0, &b.0, &plan).map_err(py_err)?;
    Ok((PyPointCloud(o1), PyPointCloud(o2), json(&plan)))
}

/// Scene swap followed by instance paste; returns the output and plan JSON.
#[pyfunction]
#[pyo3(signature = (a, b, seed, instance_classes=None, paste_count=None))]
fn polar_mix(
    a: &PyPointCloud,
    b: &PyPointCloud,
    seed: u64,
    instance_classes: Option<Vec<u32>>,
    paste_count: Option<usize>,
) -> PyResult<(PyPointCloud, String)> {
    let mut config = PolarMixConfig::default();
    if let Some(c) = instance_classes {
        config.instance_classes = to_labels(c);
    }
    if let Some(k) = paste_count {
        config.paste_count = k;
    }
    let plan =
        polarmix::sample_plan(&config, &mut stage_rng(seed, Stage::PolarMix)).map_err(py_err)?;
    let out = polarmix::polar_mix(&a.0, &b.0, &plan).map_err(py_err)?;
    Ok((PyPointCloud(out), json(&plan)))
}

/// One training sample exactly as `mixseg3d mix` would produce it.
#[pyfunction]
#[pyo3(signature = (a, b, seed, strategy="both", config_toml=None))]
fn mix_sample(
    a: &PyPointCloud,
    b: &PyPointCloud,
    seed: u64,
    strategy: &str,
    config_toml: Option<&str>,
) -> PyResult<(PyPointCloud, String)> {
    let strategy = match strategy {
        "lasermix" => Strategy::Lasermix,
        "polarmix" => Strategy::Polarmix,
        "both" => Strategy::Both,
        s => return Err(PyValueError::new_err(format!("unknown strategy {s:?}"))),
    };
    let config = match config_toml {
        Some(t) => RunConfig::parse(t, std::path::Path::new("<string>")).map_err(py_err)?,
        None => RunConfig::default(),
    };
    let (out, record) = pipeline::mix_sample(MixSources::pair(&a.0, &b.0), strategy, &config, seed)
        .map_err(py_err)?;
    Ok((PyPointCloud(out), json(&record)))
}

/// Canonical TTA views.
#[pyfunction]
fn canonical_views(k: usize) -> PyResult<Vec<PyAugmentation>> {
    Ok(tta::canonical_views(k)
        .map_err(py_err)?
        .into_iter()
        .map(PyAugmentation)
        .collect())
}

#[pyclass(name = "VoxelModel", module = "mixseg3d", frozen)]
struct PyVoxelModel(VoxelMajorityModel);

#[pymethods]
impl PyVoxelModel {
    #[staticmethod]
    #[pyo3(signature = (clouds, voxel_size=0.5, num_classes=mixseg3d_core::NUM_CLASSES, search_radius=DEFAULT_SEARCH_RADIUS))]
    fn fit(
        clouds: Vec<PyRef<'_, PyPointCloud>>,
        voxel_size: f64,
        num_classes: usize,
        search_radius: u32,
    ) -> PyResult<Self> {
        VoxelMajorityModel::fit(
            clouds.iter().map(|c| &c.0),
            voxel_size,
            num_classes,
            search_radius,
        )
        .map(Self)
        .map_err(py_err)
    }

    /// Row-major per-point class scores.
    fn predict(&self, cloud: &PyPointCloud) -> PyResult<Vec<Vec<f64>>> {
        let s = self.0.predict(&cloud.0).map_err(py_err)?;
        Ok(s.rows().map(<[f64]>::to_vec).collect())
    }

    /// Aggregated scores over the views and the argmax labels.
    fn tta_predict(
        &self,
        cloud: &PyPointCloud,
        views: Vec<PyAugmentation>,
    ) -> PyResult<(Vec<Vec<f64>>, Vec<u32>)> {
        let views: Vec<RigidAugmentation> = views.into_iter().map(|v| v.0).collect();
        let s = tta::tta_predict(&self.0, &cloud.0, &views).map_err(py_err)?;
        let labels = tta::argmax_labels(&s).into_iter().map(|c| c.0).collect();
        Ok((s.rows().map(<[f64]>::to_vec).collect(), labels))
    }
}

/// Mean IoU (fraction) and per-class IoU (None where undefined).
#[pyfunction]
#[pyo3(signature = (gt, pred, num_classes=mixseg3d_core::NUM_CLASSES, ignore=ClassId::IGNORE.0))]
fn miou(
    gt: Vec<u32>,
    pred: Vec<u32>,
    num_classes: usize,
    ignore: u32,
) -> PyResult<(f64, Vec<Option<f64>>)> {
    let mut m = ConfusionMatrix::new(num_classes);
    m.accumulate_with_ignore(&to_labels(gt), &to_labels(pred), ClassId(ignore))
        .map_err(py_err)?;
    let per_class = m.iou_per_class();
    let mean = metrics::mean_iou(&per_class).map_err(py_err)?;
    Ok((mean, per_class))
}

#[pymodule]
fn mixseg3d(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", mixseg3d_core::VERSION)?;
    m.add("IGNORE", ClassId::IGNORE.0)?;
    m.add("CLASS_NAMES", mixseg3d_core::classes::CLASS_NAMES.to_vec())?;
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyAugmentation>()?;
    m.add_class::<PyVoxelModel>()?;
    m.add_function(wrap_pyfunction!(generate_scene, m)?)?;
    m.add_function(wrap_pyfunction!(laser_mix, m)?)?;
    m.add_function(wrap_pyfunction!(polar_mix, m)?)?;
    m.add_function(wrap_pyfunction!(mix_sample, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_views, m)?)?;
    m.add_function(wrap_pyfunction!(miou, m)?)?;
    Ok(())
}
