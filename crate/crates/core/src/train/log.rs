use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{StepReport, TrainError};

/// Header of the generator loss log.
pub const LOSS_LOG_HEADER: &str = "step,r1,r2,r3,r4,gan_c,gan_a,total";

fn open(path: &Path, header: &str, append: bool) -> Result<BufWriter<File>, TrainError> {
    let io = |source| TrainError::Io { path: path.to_path_buf(), source };
    let fresh = !append || !path.exists();
    let file = OpenOptions::new().create(true).append(append).write(true).truncate(!append).open(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    if fresh {
        writeln!(w, "{header}").map_err(io)?;
    }
    Ok(w)
}

/// Comma-separated generator losses, one row per step.
pub struct LossLog {
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl LossLog {
    /// Creates the log, or appends to an existing one when resuming.
    pub fn open(path: &Path, append: bool) -> Result<Self, TrainError> {
        Ok(LossLog { out: open(path, LOSS_LOG_HEADER, append)?, path: path.to_path_buf() })
    }

    pub fn record(&mut self, r: &StepReport) -> Result<(), TrainError> {
        let g = &r.generator;
        writeln!(self.out, "{},{},{},{},{},{},{},{}", r.step, g.r1, g.r2, g.r3, g.r4, g.gan_c, g.gan_a, g.total)
            .map_err(|source| TrainError::Io { path: self.path.clone(), source })
    }

    pub fn flush(&mut self) -> Result<(), TrainError> {
        self.out.flush().map_err(|source| TrainError::Io { path: self.path.clone(), source })
    }
}

/// Comma-separated discriminator losses, one row per step.
pub struct DiscriminatorLog {
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl DiscriminatorLog {
    pub fn open(path: &Path, append: bool) -> Result<Self, TrainError> {
        Ok(DiscriminatorLog { out: open(path, "step,loss_dc,loss_da", append)?, path: path.to_path_buf() })
    }

    pub fn record(&mut self, r: &StepReport) -> Result<(), TrainError> {
        writeln!(self.out, "{},{},{}", r.step, r.loss_dc, r.loss_da)
            .map_err(|source| TrainError::Io { path: self.path.clone(), source })
    }

    pub fn flush(&mut self) -> Result<(), TrainError> {
        self.out.flush().map_err(|source| TrainError::Io { path: self.path.clone(), source })
    }
}
