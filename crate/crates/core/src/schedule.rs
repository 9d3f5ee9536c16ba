//! EP schedules written as `POTENTIALV×DURATIONs×COUNT`, comma separated,
//! e.g. `0.6V×2s×5` or `0.6Vx2sx5,0.7Vx1sx2`. `*` is accepted for `×`.

use crate::error::{Error, Result};
use crate::growth::EpCondition;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleEntry {
    pub condition: EpCondition,
    pub repeat: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl EpSchedule {
    /// The schedule expanded into individual steps.
    pub fn steps(&self) -> impl Iterator<Item = EpCondition> + '_ {
        self.entries.iter().flat_map(|e| std::iter::repeat_n(e.condition, e.repeat))
    }

    pub fn len(&self) -> usize {
        self.entries.iter().map(|e| e.repeat).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::str::FromStr for EpSchedule {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = |part: &str, why: &str| Error::InvalidCondition(format!("bad schedule entry `{part}`: {why}"));
        let mut entries = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let normalized = part.replace(['×', '*'], "x");
            let fields: Vec<&str> = normalized.split('x').map(str::trim).collect();
            let (pot, dur, rep) = match fields.as_slice() {
                [p, d] => (*p, *d, "1"),
                [p, d, r] => (*p, *d, *r),
                _ => return Err(bad(part, "expected POTENTIALVxDURATIONs[xCOUNT]")),
            };
            let potential: f64 = pot
                .strip_suffix(['V', 'v'])
                .ok_or_else(|| bad(part, "potential needs a V suffix"))?
                .parse()
                .map_err(|_| bad(part, "potential is not a number"))?;
            let duration: f64 = dur
                .strip_suffix('s')
                .ok_or_else(|| bad(part, "duration needs an s suffix"))?
                .parse()
                .map_err(|_| bad(part, "duration is not a number"))?;
            let repeat: usize = rep.parse().map_err(|_| bad(part, "count is not an integer"))?;
            if repeat == 0 {
                return Err(bad(part, "count must be >= 1"));
            }
            entries.push(ScheduleEntry { condition: EpCondition::new(potential, duration)?, repeat });
        }
        if entries.is_empty() {
            return Err(Error::InvalidCondition("empty EP schedule".into()));
        }
        Ok(Self { entries })
    }
}
