use std::fs::File;
use std::io::BufWriter;

use anyhow::{Context, Result};
use stixelflow::cost::{amdahl as amdahl_of, compare_profiles, compare_regions, load_profiles, case_study_profiles, render_table, write_report};

use crate::{AmdahlArgs, ReportArgs};

pub fn report(args: &ReportArgs) -> Result<()> {
    let profiles = match &args.profiles {
        Some(p) => load_profiles(p).with_context(|| format!("{}", p.display()))?,
        None => case_study_profiles(),
    };
    let report = if args.by_region {
        compare_regions(&profiles, args.core_hours)?
    } else {
        compare_profiles(&profiles, args.core_hours, args.n_species)?
    };
    print!("{}", render_table(&report));
    if let Some(out) = &args.out {
        let f = File::create(out).with_context(|| format!("creating {}", out.display()))?;
        write_report(&report, BufWriter::new(f))?;
    }
    Ok(())
}

pub fn amdahl(args: &AmdahlArgs) -> Result<()> {
    println!("{:.4}", amdahl_of(args.fraction, args.factor)?);
    Ok(())
}
