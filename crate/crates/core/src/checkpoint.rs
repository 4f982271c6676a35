//! Binary checkpoint of a [`SimState`].
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic    8 bytes  "H2FCGCKP"
//! version  u32
//! t        f64      simulated time [s]
//! n        u64      cycle counter
//! c_env    f64
//! load     f64      load of the stored mechanical state
//! arrays   each as u64 length followed by the items:
//!          u, strain (3 per point), stress0 (4 per point), psi0, sigma_h,
//!          phi, c, exposed (u8), alpha_bar, alpha_max, gate_max,
//!          activated (u8), h_irr
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::driver::SimState;
use crate::error::{Error, Result};
use crate::hydrogen::HydrogenState;
use crate::mechanics::MechState;
use crate::phasefield::{FatigueHistory, IrreversibilityHistory};

pub const MAGIC: &[u8; 8] = b"H2FCGCKP";
pub const VERSION: u32 = 1;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn f64s<'a>(&mut self, len: usize, items: impl Iterator<Item = &'a f64>) -> Result<()> {
        self.u64(len as u64)?;
        for &v in items {
            self.f64(v)?;
        }
        Ok(())
    }
    fn bools(&mut self, items: &[bool]) -> Result<()> {
        self.u64(items.len() as u64)?;
        let bytes: Vec<u8> = items.iter().map(|&b| b as u8).collect();
        Ok(self.0.write_all(&bytes)?)
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        // Guards against allocating from a corrupt length.
        if n > 1 << 34 {
            return Err(Error::Checkpoint(format!("implausible array length {n}")));
        }
        Ok(n as usize)
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn tuples<const K: usize>(&mut self) -> Result<Vec<[f64; K]>> {
        let flat = self.f64s()?;
        if flat.len() % K != 0 {
            return Err(Error::Checkpoint(format!(
                "array length {} not a multiple of {K}",
                flat.len()
            )));
        }
        Ok(flat.chunks_exact(K).map(|c| std::array::from_fn(|i| c[i])).collect())
    }
    fn bools(&mut self) -> Result<Vec<bool>> {
        let n = self.len()?;
        let mut b = vec![0u8; n];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
        b.into_iter()
            .map(|v| match v {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::Checkpoint(format!("invalid flag byte {v}"))),
            })
            .collect()
    }
}

pub fn write_checkpoint<W: Write>(out: W, state: &SimState) -> Result<()> {
    let mut w = Writer(out);
    w.0.write_all(MAGIC)?;
    w.u32(VERSION)?;
    w.f64(state.t)?;
    w.u64(state.n)?;
    w.f64(state.hydrogen.c_env)?;
    let m = &state.mech;
    w.f64(m.load)?;
    w.f64s(m.u.len(), m.u.iter())?;
    w.f64s(3 * m.strain.len(), m.strain.iter().flatten())?;
    w.f64s(4 * m.stress0.len(), m.stress0.iter().flatten())?;
    w.f64s(m.psi0.len(), m.psi0.iter())?;
    w.f64s(m.sigma_h.len(), m.sigma_h.iter())?;
    w.f64s(state.phi.len(), state.phi.iter())?;
    w.f64s(state.hydrogen.c.len(), state.hydrogen.c.iter())?;
    w.bools(&state.hydrogen.exposed)?;
    let f = &state.fatigue;
    w.f64s(f.alpha_bar.len(), f.alpha_bar.iter())?;
    w.f64s(f.alpha_max.len(), f.alpha_max.iter())?;
    w.f64s(f.gate_max.len(), f.gate_max.iter())?;
    w.bools(&f.activated)?;
    w.f64s(state.irreversibility.h.len(), state.irreversibility.h.iter())?;
    w.0.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<SimState> {
    let mut r = Reader(input);
    let magic: [u8; 8] = r.bytes()?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let t = r.f64()?;
    let n = r.u64()?;
    let c_env = r.f64()?;
    let load = r.f64()?;
    let mech = MechState {
        u: r.f64s()?,
        strain: r.tuples()?,
        stress0: r.tuples()?,
        psi0: r.f64s()?,
        sigma_h: r.f64s()?,
        load,
    };
    let phi = r.f64s()?;
    let hydrogen = HydrogenState {
        c: r.f64s()?,
        c_env,
        exposed: r.bools()?,
    };
    let fatigue = FatigueHistory {
        alpha_bar: r.f64s()?,
        alpha_max: r.f64s()?,
        gate_max: r.f64s()?,
        activated: r.bools()?,
    };
    let irreversibility = IrreversibilityHistory { h: r.f64s()? };
    let nn = phi.len();
    let nq = mech.psi0.len();
    let consistent = mech.u.len() == 2 * nn
        && hydrogen.c.len() == nn
        && hydrogen.exposed.len() == nn
        && [
            mech.strain.len(),
            mech.stress0.len(),
            mech.sigma_h.len(),
            fatigue.len(),
            fatigue.alpha_max.len(),
            fatigue.gate_max.len(),
            fatigue.activated.len(),
            irreversibility.h.len(),
        ]
        .iter()
        .all(|&l| l == nq);
    if !consistent {
        return Err(Error::Checkpoint("array sizes are inconsistent".into()));
    }
    Ok(SimState {
        mech,
        phi,
        hydrogen,
        fatigue,
        irreversibility,
        t,
        n,
    })
}

pub fn save(path: &Path, state: &SimState) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_checkpoint(std::io::BufWriter::new(file), state)
}

pub fn load(path: &Path) -> Result<SimState> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file))
}
