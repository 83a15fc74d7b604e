//! Self-describing binary container: `key=value` header lines (`name`,
//! `shape`, `dtype=f64le`, `time_seconds`, then any extras), a blank line,
//! then the raw little-endian payload.

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{ColumnCorrector, NetSpec, Normalization, WeightVector, N_OUTPUTS, N_PREDICTORS};
use crate::qg::{Grid, QgState};

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub name: String,
    pub shape: Vec<usize>,
    pub time_seconds: f64,
    pub extra: Vec<(String, String)>,
    pub data: Vec<f64>,
}

const RESERVED: [&str; 4] = ["name", "shape", "dtype", "time_seconds"];

impl Checkpoint {
    pub fn new(name: &str, shape: Vec<usize>, time_seconds: f64, data: Vec<f64>) -> Self {
        Self { name: name.into(), shape, time_seconds, extra: Vec::new(), data }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.extra.push((key.into(), value.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.extra.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let shape: Vec<String> = self.shape.iter().map(|s| s.to_string()).collect();
        let mut head = format!(
            "name={}\nshape={}\ndtype=f64le\ntime_seconds={:.16e}\n",
            self.name,
            shape.join(","),
            self.time_seconds
        );
        for (k, v) in &self.extra {
            head += &format!("{k}={v}\n");
        }
        head += "\n";
        let mut out = head.into_bytes();
        out.reserve(8 * self.data.len());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |r: String| Error::data(path, r);
        let split = bytes.windows(2).position(|w| w == b"\n\n").ok_or_else(|| bad("no header terminator".into()))?;
        let head = std::str::from_utf8(&bytes[..split]).map_err(|_| bad("header is not UTF-8".into()))?;
        let body = &bytes[split + 2..];
        let (mut name, mut shape, mut dtype, mut time) = (None, None, None, None);
        let mut extra = Vec::new();
        for line in head.lines() {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("bad header line `{line}`")))?;
            match k {
                "name" => name = Some(v.to_string()),
                "shape" => {
                    let s: std::result::Result<Vec<usize>, _> =
                        if v.is_empty() { Ok(Vec::new()) } else { v.split(',').map(str::parse).collect() };
                    shape = Some(s.map_err(|_| bad(format!("bad shape `{v}`")))?);
                }
                "dtype" => dtype = Some(v.to_string()),
                "time_seconds" => time = Some(v.parse::<f64>().map_err(|_| bad(format!("bad time `{v}`")))?),
                _ => extra.push((k.to_string(), v.to_string())),
            }
        }
        let missing = |k: &str| bad(format!("header lacks `{k}`"));
        let name = name.ok_or_else(|| missing("name"))?;
        let shape = shape.ok_or_else(|| missing("shape"))?;
        let time_seconds = time.ok_or_else(|| missing("time_seconds"))?;
        if dtype.as_deref() != Some("f64le") {
            return Err(bad(format!("unsupported dtype {dtype:?}")));
        }
        let n: usize = shape.iter().product();
        if body.len() != 8 * n {
            return Err(bad(format!("payload has {} bytes, shape needs {}", body.len(), 8 * n)));
        }
        let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { name, shape, time_seconds, extra, data })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::data(path, e.to_string()))?;
        Self::from_bytes(&bytes, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        debug_assert!(self.extra.iter().all(|(k, _)| !RESERVED.contains(&k.as_str())));
        super::write_file(path, &self.to_bytes())
    }

    /// Stack of states sharing a grid, shape `[n, 2, ny, nx]`, stamped with the first time.
    pub fn from_states(name: &str, states: &[QgState]) -> Result<Self> {
        let first = states.first().ok_or_else(|| Error::Insufficient(format!("no states for {name}")))?;
        let g = first.grid;
        let mut data = Vec::with_capacity(states.len() * g.len());
        for s in states {
            if s.grid != g {
                return Err(Error::Dimension { what: "checkpoint state grid", expected: g.len(), got: s.grid.len() });
            }
            data.extend_from_slice(&s.psi);
        }
        let mut c = Self::new(name, vec![states.len(), 2, g.ny, g.nx], first.valid_time, data);
        if states.len() > 1 {
            c = c.with("time_step_seconds", format!("{:.16e}", states[1].valid_time - first.valid_time));
        }
        Ok(c)
    }

    /// Inverse of [`Checkpoint::from_states`].
    pub fn states(&self, path: &Path) -> Result<Vec<QgState>> {
        let [n, l, ny, nx] = self.shape[..] else {
            return Err(Error::data(path, format!("expected a [n,2,ny,nx] state stack, got shape {:?}", self.shape)));
        };
        if l != 2 {
            return Err(Error::data(path, "state stack must have two layers"));
        }
        let dt = match self.get("time_step_seconds") {
            Some(v) => v.parse::<f64>().map_err(|_| Error::data(path, "bad time_step_seconds"))?,
            None => 0.0,
        };
        let g = Grid::new(nx, ny);
        Ok(self
            .data
            .chunks_exact(g.len())
            .take(n)
            .enumerate()
            .map(|(k, c)| QgState { grid: g, psi: c.to_vec(), valid_time: self.time_seconds + k as f64 * dt })
            .collect())
    }

    /// Net weights followed by the four normalisation vectors.
    pub fn from_corrector(c: &ColumnCorrector) -> Self {
        let n = &c.norm;
        let data: Vec<f64> = c
            .weights
            .as_slice()
            .iter()
            .chain(&n.in_mean)
            .chain(&n.in_std)
            .chain(&n.out_mean)
            .chain(&n.out_std)
            .copied()
            .collect();
        Self::new("weights", vec![data.len()], 0.0, data)
            .with("netspec", c.spec.to_text())
            .with("payload", "weights,in_mean,in_std,out_mean,out_std")
    }

    pub fn corrector(&self, path: &Path) -> Result<ColumnCorrector> {
        let spec_text = self.get("netspec").ok_or_else(|| Error::data(path, "weight file lacks `netspec`"))?;
        let spec = NetSpec::from_text(spec_text).map_err(|e| Error::data(path, e.to_string()))?;
        let np = spec.n_params();
        let expect = np + 2 * N_PREDICTORS + 2 * N_OUTPUTS;
        if self.data.len() != expect {
            return Err(Error::data(path, format!("weight payload has {} values, expected {expect}", self.data.len())));
        }
        let mut it = self.data.iter().copied();
        let mut take = |k: usize| it.by_ref().take(k).collect::<Vec<f64>>();
        let w = WeightVector(take(np));
        let norm = Normalization {
            in_mean: take(N_PREDICTORS),
            in_std: take(N_PREDICTORS),
            out_mean: take(N_OUTPUTS),
            out_std: take(N_OUTPUTS),
        };
        ColumnCorrector::new(spec, w, norm).map_err(|e| Error::data(path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_weights;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let c = Checkpoint::new("x", vec![2], 3.5, vec![1.0, -2.0]);
        let b = c.to_bytes();
        let text = String::from_utf8_lossy(&b[..b.len() - 16]);
        assert_eq!(text, "name=x\nshape=2\ndtype=f64le\ntime_seconds=3.5000000000000000e0\n\n");
        assert_eq!(&b[b.len() - 8..], &(-2.0f64).to_le_bytes());
    }

    #[test]
    fn states_round_trip() {
        let g = Grid::new(3, 2);
        let a = QgState { grid: g, psi: (0..12).map(|k| k as f64 * 0.1).collect(), valid_time: 7200.0 };
        let b = QgState { psi: a.psi.iter().map(|v| -v).collect(), valid_time: 10800.0, ..a.clone() };
        let c = Checkpoint::from_states("truth", &[a.clone(), b.clone()]).unwrap();
        assert_eq!(c.shape, vec![2, 2, 2, 3]);
        let back = Checkpoint::from_bytes(&c.to_bytes(), Path::new("t")).unwrap();
        assert_eq!(back.states(Path::new("t")).unwrap(), vec![a, b]);
    }

    #[test]
    fn corrector_round_trip() {
        let spec = NetSpec::column_default();
        let mut norm = Normalization::identity();
        norm.out_std = vec![0.25, 1.0 / 3.0];
        let c = ColumnCorrector::new(spec.clone(), init_weights(&spec, 3), norm).unwrap();
        let k = Checkpoint::from_corrector(&c);
        let back = Checkpoint::from_bytes(&k.to_bytes(), Path::new("w")).unwrap().corrector(Path::new("w")).unwrap();
        assert_eq!(back.weights, c.weights);
        assert_eq!(back.norm, c.norm);
        assert_eq!(back.spec, c.spec);
    }

    #[test]
    fn corrupt_payloads_name_the_file() {
        let c = Checkpoint::new("x", vec![3], 0.0, vec![1.0, 2.0, 3.0]);
        let mut b = c.to_bytes();
        b.pop();
        let e = Checkpoint::from_bytes(&b, Path::new("dir/x.chk")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("dir/x.chk"));
        assert!(Checkpoint::from_bytes(b"name=x\n", Path::new("y")).is_err());
    }

    proptest! {
        #[test]
        fn payload_round_trips_bitwise(data in proptest::collection::vec(any::<f64>(), 0..40), t in any::<f64>()) {
            let c = Checkpoint::new("p", vec![data.len()], t, data.clone()).with("k", "v");
            let back = Checkpoint::from_bytes(&c.to_bytes(), Path::new("p")).unwrap();
            prop_assert_eq!(back.data.len(), data.len());
            for (a, b) in back.data.iter().zip(&data) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(back.get("k"), Some("v"));
            if t.is_nan() {
                prop_assert!(back.time_seconds.is_nan());
            } else {
                prop_assert_eq!(back.time_seconds, t);
            }
        }
    }
}
