use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use qweyl_ffi::*;

const GROUND: [u32; 3] = [0, 0, 0];

fn last_error() -> String {
    unsafe { CStr::from_ptr(qweyl_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn hamiltonian(n_max: u32, theta: f64) -> *mut QweylHamiltonian {
    let mut h = ptr::null_mut();
    let s = unsafe {
        qweyl_hamiltonian_new(
            n_max,
            theta,
            QweylMode::Paper,
            QweylModel::Substituted,
            &mut h,
        )
    };
    assert_eq!(s, QweylStatus::Ok);
    assert!(!h.is_null());
    h
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(qweyl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn relation_residual() {
    let mut r = f64::NAN;
    assert_eq!(
        unsafe { qweyl_relation_residual(0.1, 6, &mut r) },
        QweylStatus::Ok
    );
    assert!(r <= 1e-12);
    assert_eq!(
        unsafe { qweyl_relation_residual(0.1, 1, &mut r) },
        QweylStatus::InvalidArgument
    );
    assert!(last_error().contains("degree"));
    assert_eq!(
        unsafe { qweyl_relation_residual(0.1, 6, ptr::null_mut()) },
        QweylStatus::NullPointer
    );
}

#[test]
fn hamiltonian_elements() {
    let h = hamiltonian(6, 0.01);
    unsafe {
        assert_eq!(qweyl_hamiltonian_dim(h), 343);
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(
            qweyl_hamiltonian_element(h, GROUND.as_ptr(), GROUND.as_ptr(), &mut re, &mut im),
            QweylStatus::Ok
        );
        assert!((re - 1.5).abs() < 1e-13);
        assert!((im + 0.015).abs() < 1e-13);
        let far = [7u32, 0, 0];
        assert_eq!(
            qweyl_hamiltonian_element(h, far.as_ptr(), GROUND.as_ptr(), &mut re, &mut im),
            QweylStatus::InvalidArgument
        );
        let mut buf = vec![0.0; 2 * 343 * 343];
        assert_eq!(
            qweyl_hamiltonian_copy(h, buf.as_mut_ptr(), 10),
            QweylStatus::BufferTooSmall
        );
        assert_eq!(
            qweyl_hamiltonian_copy(h, buf.as_mut_ptr(), buf.len()),
            QweylStatus::Ok
        );
        assert!((buf[0] - 1.5).abs() < 1e-13);
        assert!((buf[1] + 0.015).abs() < 1e-13);
        qweyl_hamiltonian_free(h);
        qweyl_hamiltonian_free(ptr::null_mut());
        assert_eq!(qweyl_hamiltonian_dim(ptr::null()), 0);
    }
}

#[test]
fn bad_cutoff() {
    let mut h = ptr::null_mut();
    let s =
        unsafe { qweyl_hamiltonian_new(0, 0.0, QweylMode::Paper, QweylModel::Substituted, &mut h) };
    assert_eq!(s, QweylStatus::InvalidArgument);
    assert!(h.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn shift_and_mixing() {
    let (mut re, mut im) = (f64::NAN, f64::NAN);
    let s = unsafe {
        qweyl_energy_shift(
            GROUND.as_ptr(),
            1.0,
            QweylMode::Rederived,
            QweylModel::Substituted,
            &mut re,
            &mut im,
        )
    };
    assert_eq!(s, QweylStatus::Ok);
    assert!(re.abs() < 1e-13 && (im + 3.0).abs() < 1e-13);
    let mut f = f64::NAN;
    let s = unsafe {
        qweyl_mixing_outside_fraction(8, QweylMode::Paper, QweylModel::Substituted, &mut f)
    };
    assert_eq!(s, QweylStatus::Ok);
    assert!(f > 0.9 && f < 1.0);
}

#[test]
fn evolution_round_trip() {
    let h = hamiltonian(6, 0.01);
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(
            qweyl_evolve(h, GROUND.as_ptr(), 0.5, 1e-3, QweylMethod::Expm, &mut t),
            QweylStatus::Ok
        );
        let n = qweyl_trajectory_len(t);
        assert_eq!(n, 501);
        assert!(!qweyl_trajectory_aborted(t));
        let mut times = vec![0.0; n];
        let mut norms = vec![0.0; n];
        assert_eq!(
            qweyl_trajectory_norms(t, times.as_mut_ptr(), norms.as_mut_ptr(), n),
            QweylStatus::Ok
        );
        assert_eq!(times[0], 0.0);
        assert!((times[n - 1] - 0.5).abs() < 1e-12);
        assert_eq!(norms[0], 1.0);
        assert!(norms[n - 1] < 1.0);
        let mut dev = f64::NAN;
        assert_eq!(qweyl_norm_flow_deviation(t, h, &mut dev), QweylStatus::Ok);
        assert!(dev < 1e-6);
        assert_eq!(
            qweyl_trajectory_norms(t, ptr::null_mut(), norms.as_mut_ptr(), 3),
            QweylStatus::BufferTooSmall
        );
        qweyl_trajectory_free(t);

        let mut t = ptr::null_mut();
        assert_eq!(
            qweyl_evolve(h, GROUND.as_ptr(), 1.0, 0.5, QweylMethod::Rk4, &mut t),
            QweylStatus::StepSize
        );
        assert!(t.is_null());
        qweyl_hamiltonian_free(h);
    }
}

#[test]
fn header_declares_every_export() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/qweyl.h")).unwrap();
    let src = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let names: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(names.len() >= 14);
    for n in names {
        assert!(header.contains(&format!("{n}(")), "{n}");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let Ok(out) = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(dir.join("examples/demo.c"))
        .output()
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
