//! Python bindings: field arithmetic, CRC, encoding and decoding, the noisy
//! channel, recovery and whole-scenario simulation.

use std::collections::HashMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use flyprac::analysis::{AnalysisParams, AnalysisRow};
use flyprac::channel::BinarySymmetricChannel;
use flyprac::codec::{self, CodedPacket, GenerationConfig, OriginalPacket, PacketLayout};
use flyprac::crc::Crc8;
use flyprac::galois::{Field, FieldElement, FieldSpec};
use flyprac::harness::{self, ScenarioConfig};
use flyprac::recovery::{self, PacketStatus, RecoveryConfig};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn field(q: u8) -> PyResult<&'static Field> {
    Ok(Field::shared(FieldSpec::for_bits(q).map_err(err)?))
}

#[pyfunction]
#[pyo3(signature = (a, b, q = 8))]
fn gf_mul(a: u8, b: u8, q: u8) -> PyResult<u8> {
    Ok(field(q)?.mul(FieldElement(a), FieldElement(b)).value())
}

#[pyfunction]
#[pyo3(signature = (a, q = 8))]
fn gf_inv(a: u8, q: u8) -> PyResult<u8> {
    Ok(field(q)?.inv(FieldElement(a)).map_err(err)?.value())
}

/// CRC-8 of a byte string with the default generator.
#[pyfunction]
fn crc8(data: Vec<u8>) -> u8 {
    Crc8::standard().checksum(&data)
}

/// Generation parameters. `R` is the dependent group size.
#[pyclass(name = "GenerationConfig", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGenerationConfig(GenerationConfig);

#[pymethods]
impl PyGenerationConfig {
    #[new]
    #[pyo3(signature = (g, l, s, R, q = 8, w = None, dependent_rows = true))]
    #[allow(non_snake_case)]
    fn new(
        g: usize,
        l: usize,
        s: usize,
        R: usize,
        q: u8,
        w: Option<usize>,
        dependent_rows: bool,
    ) -> PyResult<Self> {
        let mut cfg = if dependent_rows {
            GenerationConfig::dense(g, l, s, R)
        } else {
            GenerationConfig::plain(g, l, s)
        };
        cfg = cfg
            .with_field(FieldSpec::for_bits(q).map_err(err)?)
            .with_sparsity(w);
        cfg.validate().map_err(err)?;
        Ok(Self(cfg))
    }

    #[getter]
    fn g(&self) -> usize {
        self.0.generation_size
    }

    #[getter]
    fn l(&self) -> usize {
        self.0.symbols_per_packet
    }

    #[getter]
    fn s(&self) -> usize {
        self.0.segments
    }

    #[getter(R)]
    fn group_size(&self) -> usize {
        self.0.group_size
    }

    /// Bits on the wire per coded packet.
    fn packet_bits(&self) -> usize {
        PacketLayout::new(&self.0).total_bits()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(name = "Packet", skip_from_py_object)]
#[derive(Clone)]
struct PyPacket(CodedPacket);

#[pymethods]
impl PyPacket {
    #[getter]
    fn group_id(&self) -> u16 {
        self.0.group_id
    }

    #[getter]
    fn coefficients(&self) -> Vec<u8> {
        self.0.coefficients.clone()
    }

    #[getter]
    fn symbols(&self) -> Vec<u8> {
        self.0.symbols.clone()
    }

    #[getter]
    fn inner_crcs(&self) -> Vec<u8> {
        self.0.inner_crcs.clone()
    }

    #[getter]
    fn outer_crc(&self) -> u8 {
        self.0.outer_crc
    }

    fn outer_ok(&self, config: &PyGenerationConfig) -> bool {
        self.0.outer_ok(&config.0)
    }

    fn to_bytes(&self, config: &PyGenerationConfig) -> Vec<u8> {
        PacketLayout::new(&config.0).serialize(&self.0)
    }

    #[staticmethod]
    fn from_bytes(data: Vec<u8>, config: &PyGenerationConfig) -> PyResult<Self> {
        PacketLayout::new(&config.0)
            .deserialize(&data)
            .map(Self)
            .map_err(err)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

fn unwrap_packets(packets: Vec<PyRef<'_, PyPacket>>) -> Vec<CodedPacket> {
    packets.iter().map(|p| p.0.clone()).collect()
}

fn wrap_packets(packets: Vec<CodedPacket>) -> Vec<PyPacket> {
    packets.into_iter().map(PyPacket).collect()
}

#[pyclass(name = "Encoder")]
struct PyEncoder {
    inner: codec::Encoder,
    rng: ChaCha8Rng,
}

#[pymethods]
impl PyEncoder {
    /// `originals` holds `g` byte strings of `l` symbols each.
    #[new]
    fn new(originals: Vec<Vec<u8>>, config: &PyGenerationConfig, seed: u64) -> PyResult<Self> {
        let orig: Vec<OriginalPacket> = originals.into_iter().map(OriginalPacket::new).collect();
        Ok(Self {
            inner: codec::Encoder::new(&orig, &config.0).map_err(err)?,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    fn next_group(&mut self) -> Vec<PyPacket> {
        wrap_packets(self.inner.next_group(&mut self.rng).packets)
    }
}

/// Solves for the originals; raises if the packets are rank deficient.
#[pyfunction]
fn decode(
    packets: Vec<PyRef<'_, PyPacket>>,
    config: &PyGenerationConfig,
) -> PyResult<Vec<Vec<u8>>> {
    let out = codec::decode(&unwrap_packets(packets), &config.0).map_err(err)?;
    Ok(out.into_iter().map(|o| o.symbols).collect())
}

#[pyclass(name = "Channel")]
struct PyChannel(BinarySymmetricChannel);

#[pymethods]
impl PyChannel {
    #[new]
    fn new(epsilon: f64, seed: u64) -> PyResult<Self> {
        BinarySymmetricChannel::with_rng(epsilon, ChaCha8Rng::seed_from_u64(seed))
            .map(Self)
            .map_err(err)
    }

    /// Sends one packet through the channel; header bits are not corrupted.
    fn transmit(&mut self, packet: &PyPacket, config: &PyGenerationConfig) -> PyPacket {
        PyPacket(
            self.0
                .transmit_packet(&packet.0, &PacketLayout::new(&config.0)),
        )
    }
}

/// Inconsistent symbol columns of a received dependent group.
#[pyfunction]
fn estimate(group: Vec<PyRef<'_, PyPacket>>, config: &PyGenerationConfig) -> PyResult<Vec<usize>> {
    let broken = recovery::estimate(&unwrap_packets(group), &config.0).map_err(err)?;
    Ok(broken.columns().to_vec())
}

/// Repairs a received dependent group. Returns the packets and a status
/// string per member.
#[pyfunction]
fn recover_group(
    group: Vec<PyRef<'_, PyPacket>>,
    config: &PyGenerationConfig,
) -> (Vec<PyPacket>, Vec<&'static str>) {
    let out = recovery::recover_group(
        &unwrap_packets(group),
        &config.0,
        &RecoveryConfig::default(),
    );
    let status = out
        .status
        .iter()
        .map(|s| match s {
            PacketStatus::Valid => "valid",
            PacketStatus::Recovered => "recovered",
            PacketStatus::Reconstructed => "reconstructed",
            PacketStatus::Invalid => "invalid",
        })
        .collect();
    (wrap_packets(out.packets), status)
}

/// Runs a scenario given as TOML and returns its averaged metrics.
#[pyfunction]
#[pyo3(signature = (scenario = ""))]
fn simulate(py: Python<'_>, scenario: &str) -> PyResult<HashMap<&'static str, f64>> {
    let sc = ScenarioConfig::from_toml(scenario).map_err(err)?;
    let sim = py.detach(|| harness::run(&sc)).map_err(err)?;
    let m = sim.metrics;
    Ok(HashMap::from([
        ("trials", m.trials as f64),
        ("total_transmissions", m.total_transmissions),
        ("total_transmissions_sd", m.total_transmissions_sd),
        ("corrupted", m.corrupted),
        ("recovered", m.recovered),
        ("false_recoveries", m.false_recoveries),
        ("recovery_ratio", m.recovery_ratio),
        ("add", m.add),
        ("completion_time_model_s", m.completion_time_model),
        ("goodput_bps", m.goodput),
        ("decode_failures", m.decode_failures as f64),
    ]))
}

/// Closed-form quantities at one parameter point. Values the weight
/// enumerator cannot provide are `None`.
#[pyfunction]
#[pyo3(signature = (epsilon, R, b = 8, l = 50, s = 5, g = 100))]
#[allow(non_snake_case)]
fn analyze(
    epsilon: f64,
    R: u32,
    b: u32,
    l: u32,
    s: u32,
    g: u32,
) -> PyResult<HashMap<&'static str, Option<f64>>> {
    if !(0.0..=1.0).contains(&epsilon) || s == 0 || R == 0 {
        return Err(PyValueError::new_err(
            "epsilon must be in [0, 1], R and s positive",
        ));
    }
    let row = AnalysisRow::evaluate(
        AnalysisParams {
            epsilon,
            b,
            r: R,
            l,
            s,
            g,
        },
        Crc8::standard(),
    );
    Ok(HashMap::from([
        ("p_column_ok", Some(row.p_column_ok)),
        ("E_ic", Some(row.expected_inconsistent_columns)),
        ("p_fpe", Some(row.p_fpe_round)),
        ("p_no_estimation_failure", Some(row.p_no_estimation_failure)),
        ("p_undetected", row.p_undetected),
        ("p_sr_product", row.p_sr_product),
        ("p_sr_one_minus", row.p_sr_one_minus),
    ]))
}

#[pymodule]
fn pyflyprac(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGenerationConfig>()?;
    m.add_class::<PyPacket>()?;
    m.add_class::<PyEncoder>()?;
    m.add_class::<PyChannel>()?;
    m.add_function(wrap_pyfunction!(gf_mul, m)?)?;
    m.add_function(wrap_pyfunction!(gf_inv, m)?)?;
    m.add_function(wrap_pyfunction!(crc8, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(recover_group, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    Ok(())
}
