//! Wind and solar spec files.
//!
//! One row per unit with a `kind` of `wind` or `solar`. Columns that do not
//! apply to a kind may be blank, and blank columns take the defaults of
//! [`WindFarmSpec::new`] and [`PvArraySpec::new`]. Without the `k00`..`k23`
//! columns a farm gets the coefficient that reaches capacity at rated speed.

use std::fs::File;
use std::path::Path;

use csv::StringRecord;

use super::{PvArraySpec, RenewableError, WindFarmSpec};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenewableSpecs {
    pub wind: Vec<WindFarmSpec>,
    pub solar: Vec<PvArraySpec>,
}

const BASE_COLUMNS: [&str; 16] = [
    "gen_id",
    "kind",
    "capacity_mw",
    "initial_capacity_mw",
    "hub_height_m",
    "cut_in",
    "rated",
    "cut_out",
    "air_density",
    "turbine_efficiency",
    "rotor_diameter_m",
    "pmp0_mw",
    "gamma",
    "e0_wm2",
    "t0_c",
    "longwave_weight",
];

fn coeff_column(h: usize) -> String {
    format!("k{h:02}")
}

struct Row<'a> {
    headers: &'a StringRecord,
    rec: StringRecord,
    index: u64,
}

impl Row<'_> {
    fn raw(&self, name: &str) -> Option<&str> {
        let i = self.headers.iter().position(|h| h == name)?;
        self.rec.get(i).map(str::trim).filter(|s| !s.is_empty())
    }

    fn num(&self, name: &str) -> Result<Option<f64>, RenewableError> {
        self.raw(name)
            .map(|s| {
                s.parse::<f64>().map_err(|e| RenewableError::Parse {
                    record: self.index,
                    message: format!("{name}: {e}"),
                })
            })
            .transpose()
    }

    fn required(&self, name: &str) -> Result<f64, RenewableError> {
        self.num(name)?.ok_or_else(|| RenewableError::Parse {
            record: self.index,
            message: format!("{name} is required"),
        })
    }
}

pub fn read_specs(path: impl AsRef<Path>) -> Result<RenewableSpecs, RenewableError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut specs = RenewableSpecs::default();
    for (i, rec) in reader.records().enumerate() {
        let row = Row {
            headers: &headers,
            rec: rec?,
            index: i as u64 + 1,
        };
        let gen_id = row.required("gen_id")? as u32;
        let kind = row.raw("kind").unwrap_or("").to_ascii_lowercase();
        match kind.as_str() {
            "wind" => {
                let capacity = row.required("capacity_mw")?;
                let mut s = WindFarmSpec::new(gen_id, capacity);
                s.initial_capacity = row.num("initial_capacity_mw")?.unwrap_or(capacity);
                let fields: [(&str, &mut f64); 7] = [
                    ("hub_height_m", &mut s.hub_height),
                    ("cut_in", &mut s.cut_in),
                    ("rated", &mut s.rated),
                    ("cut_out", &mut s.cut_out),
                    ("air_density", &mut s.air_density),
                    ("turbine_efficiency", &mut s.turbine_efficiency),
                    ("rotor_diameter_m", &mut s.rotor_diameter),
                ];
                for (name, slot) in fields {
                    if let Some(v) = row.num(name)? {
                        *slot = v;
                    }
                }
                let coeffs: Vec<Option<f64>> = (0..24).map(|h| row.num(&coeff_column(h))).collect::<Result<_, _>>()?;
                if coeffs.iter().all(Option::is_some) {
                    for (h, k) in coeffs.into_iter().enumerate() {
                        s.hourly_coeff[h] = k.expect("checked");
                    }
                } else {
                    s.hourly_coeff = [1.0 / s.rated.powi(3); 24];
                }
                s.validate()?;
                specs.wind.push(s);
            }
            "solar" => {
                let mut s = PvArraySpec::new(gen_id, row.required("pmp0_mw")?);
                let fields: [(&str, &mut f64); 4] = [
                    ("gamma", &mut s.gamma),
                    ("e0_wm2", &mut s.e0),
                    ("t0_c", &mut s.t0),
                    ("longwave_weight", &mut s.longwave_weight),
                ];
                for (name, slot) in fields {
                    if let Some(v) = row.num(name)? {
                        *slot = v;
                    }
                }
                s.validate()?;
                specs.solar.push(s);
            }
            other => {
                return Err(RenewableError::Parse {
                    record: row.index,
                    message: format!("unknown kind '{other}'"),
                })
            }
        }
    }
    Ok(specs)
}

pub fn write_specs(specs: &RenewableSpecs, path: impl AsRef<Path>) -> Result<(), RenewableError> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    let mut header: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..24).map(coeff_column));
    w.write_record(&header)?;
    let blank = String::new;
    for s in &specs.wind {
        let mut rec = vec![
            s.gen_id.to_string(),
            "wind".into(),
            s.capacity.to_string(),
            s.initial_capacity.to_string(),
            s.hub_height.to_string(),
            s.cut_in.to_string(),
            s.rated.to_string(),
            s.cut_out.to_string(),
            s.air_density.to_string(),
            s.turbine_efficiency.to_string(),
            s.rotor_diameter.to_string(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
        ];
        rec.extend(s.hourly_coeff.iter().map(|k| k.to_string()));
        w.write_record(&rec)?;
    }
    for s in &specs.solar {
        let mut rec = vec![s.gen_id.to_string(), "solar".into()];
        rec.extend((0..9).map(|_| blank()));
        rec.extend([
            s.p_mp0.to_string(),
            s.gamma.to_string(),
            s.e0.to_string(),
            s.t0.to_string(),
            s.longwave_weight.to_string(),
        ]);
        rec.extend((0..24).map(|_| blank()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let mut farm = WindFarmSpec::new(19, 643.2);
        for (h, k) in farm.hourly_coeff.iter_mut().enumerate() {
            *k = 4e-4 + 1e-5 * (h as f64 - 12.0).abs();
        }
        let specs = RenewableSpecs {
            wind: vec![farm],
            solar: vec![PvArraySpec::new(9, 1.5)],
        };
        let path = dir.path().join("specs.csv");
        write_specs(&specs, &path).unwrap();
        assert_eq!(read_specs(&path).unwrap(), specs);

        std::fs::write(&path, "gen_id,kind,capacity_mw,rated,pmp0_mw\n3,wind,100,12,\n4,solar,,,5\n").unwrap();
        let short = read_specs(&path).unwrap();
        assert_eq!(short.wind[0].hourly_coeff, [1.0 / 1728.0; 24]);
        assert_eq!(short.wind[0].initial_capacity, 100.0);
        assert_eq!(short.solar[0].gamma, -0.004);
    }

    #[test]
    fn unknown_kind() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("specs.csv");
        std::fs::write(&path, "gen_id,kind\n1,tidal\n").unwrap();
        assert!(matches!(read_specs(&path), Err(RenewableError::Parse { record: 1, .. })));
    }
}
