use chrono::{NaiveDate, TimeZone, Utc};

use super::{LineLimits, ScucError, ScucInstance};
use crate::grid::GridCase;
use crate::profile::ProfileSet;
use crate::rating::{LineRatings, RatingMode};

pub const DAY_HOURS: usize = 24;

/// Each line's static rating for the whole horizon.
pub fn static_limits(case: &GridCase) -> LineLimits {
    LineLimits::PerLine(case.lines.iter().map(|l| (l.id, l.static_rating)).collect())
}

fn missing(what: &str, day: NaiveDate) -> ScucError {
    ScucError::Malformed(format!("{what} does not cover {day}"))
}

/// A one-day instance cut from horizon-long load, availability and ratings.
/// Without ratings the static ratings apply.
pub fn day_instance(
    case: &GridCase,
    load: &ProfileSet,
    availability: &ProfileSet,
    ratings: Option<&LineRatings>,
    day: NaiveDate,
) -> Result<ScucInstance, ScucError> {
    let start = Utc.from_utc_datetime(&day.and_hms_opt(0, 0, 0).expect("midnight"));
    let cut = |p: &ProfileSet, what: &str| -> Result<ProfileSet, ScucError> {
        let h = p.hour_of(start).ok_or_else(|| missing(what, day))?;
        if h + DAY_HOURS > p.hours {
            return Err(missing(what, day));
        }
        Ok(p.window(h..h + DAY_HOURS))
    };
    let load = cut(load, "load")?;
    let renewables = case.generators.iter().any(|g| g.fuel.is_renewable());
    let availability = if renewables {
        cut(availability, "renewable availability")?.series
    } else {
        Default::default()
    };
    let limits = match ratings {
        None => static_limits(case),
        Some(r) => {
            let hourly = r.hourly(start, DAY_HOURS).ok_or_else(|| missing("line ratings", day))?;
            match r.mode {
                RatingMode::Daily => LineLimits::PerLine(hourly.series.into_iter().map(|(k, v)| (k, v[0])).collect()),
                RatingMode::Hourly => LineLimits::PerHour(hourly.series),
            }
        }
    };
    let inst = ScucInstance::new(case.clone(), start, DAY_HOURS, load.series, availability, limits);
    inst.validate()?;
    Ok(inst)
}
