use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use pulseforge::synth::PulseSolution;

use crate::error::CliError;

pub const PULSE_HEADER: &str = "t,J,q,qdot,F,K,sin2Phi,cos2Phi,Re_u11,Im_u11,Re_u21,Im_u21";

/// 17 significant digits, fixed layout.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn row(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 24);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{v:.16e}");
    }
    s
}

/// Pulse table in physical units (`t = τ/h`, `J = h·Jh`, `dq/dt = h·dq/dτ`).
pub fn pulse_csv(sol: &PulseSolution) -> String {
    let scale = if sol.h > 0.0 { sol.h } else { 1.0 };
    let mut out = String::with_capacity(sol.frames.len() * 12 * 24);
    out.push_str(PULSE_HEADER);
    out.push('\n');
    for (i, (fr, u)) in sol.frames.iter().zip(&sol.unitaries).enumerate() {
        out.push_str(&row(&[
            sol.t_physical(i),
            sol.j_physical(i),
            fr.q,
            scale * fr.q1,
            fr.f,
            fr.k,
            fr.s2phi,
            fr.c2phi,
            u.u11.re,
            u.u11.im,
            u.u21.re,
            u.u21.im,
        ]));
        out.push('\n');
    }
    out
}

/// Writes via a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Spec(format!("cannot create a file in {}: {e}", dir.display())))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| CliError::Spec(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

/// To `path` when given, else stdout.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, contents),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            // a closed downstream pipe (e.g. `| head`) is not an error
            match lock.write_all(contents.as_bytes()).and_then(|_| lock.flush()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => Ok(other?),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_is_fixed() {
        assert_eq!(num(1.0), "1.0000000000000000e0");
        assert_eq!(row(&[-0.5, 2.0]), "-5.0000000000000000e-1,2.0000000000000000e0");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, "a\n").unwrap();
        write_atomic(&p, "b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "b\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
