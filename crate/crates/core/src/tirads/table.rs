use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! canonical {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

canonical!(Composition {
    Cystic => "cystic",
    Spongiform => "spongiform",
    Mixed => "mixed",
    Solid => "solid",
    Indeterminate => "indeterminate",
    Absent => "absent",
});

canonical!(Echogenicity {
    Anechoic => "anechoic",
    Hyperechoic => "hyperechoic",
    Isoechoic => "isoechoic",
    Hypoechoic => "hypoechoic",
    VeryHypoechoic => "very_hypoechoic",
    Indeterminate => "indeterminate",
    Absent => "absent",
});

canonical!(Shape {
    WiderThanTall => "wider_than_tall",
    TallerThanWide => "taller_than_wide",
    Indeterminate => "indeterminate",
    Absent => "absent",
});

canonical!(Margin {
    Smooth => "smooth",
    IllDefined => "ill_defined",
    LobulatedIrregular => "lobulated_irregular",
    ExtrathyroidalExtension => "extrathyroidal_extension",
    Indeterminate => "indeterminate",
    Absent => "absent",
});

canonical!(Focus {
    CometTail => "comet_tail",
    Macrocalcification => "macrocalcification",
    PeripheralRim => "peripheral_rim",
    Punctate => "punctate",
});

canonical!(
    /// Carried in profiles; no points.
    Vascularity {
        Avascular => "avascular",
        Normal => "normal",
        Increased => "increased",
        Indeterminate => "indeterminate",
    }
);

canonical!(
    /// The point-bearing dimensions, in table section order.
    Dimension {
        Composition => "composition",
        Echogenicity => "echogenicity",
        Shape => "shape",
        Margin => "margin",
        Foci => "foci",
    }
);

impl Dimension {
    pub fn category(self) -> crate::schema::Category {
        use crate::schema::Category;
        match self {
            Dimension::Composition => Category::Composition,
            Dimension::Echogenicity => Category::Echogenicity,
            Dimension::Shape => Category::Shape,
            Dimension::Margin => Category::Margins,
            Dimension::Foci => Category::EchogenicFoci,
        }
    }

    /// Value names the table must define for this dimension.
    pub fn value_names(self) -> Vec<&'static str> {
        match self {
            Dimension::Composition => Composition::ALL.iter().map(|v| v.name()).collect(),
            Dimension::Echogenicity => Echogenicity::ALL.iter().map(|v| v.name()).collect(),
            Dimension::Shape => Shape::ALL.iter().map(|v| v.name()).collect(),
            Dimension::Margin => Margin::ALL.iter().map(|v| v.name()).collect(),
            Dimension::Foci => Focus::ALL.iter().map(|v| v.name()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    TR1,
    TR2,
    TR3,
    TR4,
    TR5,
}

impl Level {
    pub const ALL: [Level; 5] = [Level::TR1, Level::TR2, Level::TR3, Level::TR4, Level::TR5];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u32) -> Option<Level> {
        Level::ALL.get((n as usize).checked_sub(1)?).copied()
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TR{}", self.number())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let n = t
            .strip_prefix("TR")
            .or_else(|| t.strip_prefix("tr"))
            .and_then(|d| d.trim().parse::<u32>().ok())
            .and_then(Level::from_number);
        n.ok_or_else(|| format!("`{s}` is not a level TR1..TR5"))
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("section [{section}] is missing a value for `{value}`")]
    MissingValue { section: String, value: String },
    #[error("thresholds: {0}")]
    Thresholds(String),
    #[error("table has no version")]
    NoVersion,
}

/// Points per canonical value and the total-to-level mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointTable {
    version: String,
    points: BTreeMap<(Dimension, &'static str), u32>,
    /// (minimum total, level), ascending; the first row starts at 0.
    thresholds: Vec<(u32, Level)>,
}

const DEFAULT_TABLE: &str = include_str!("../../data/acr_tirads.cfg");

impl PointTable {
    /// The bundled ACR table.
    pub fn acr_default() -> PointTable {
        PointTable::parse(DEFAULT_TABLE).expect("bundled table is valid")
    }

    pub fn default_text() -> &'static str {
        DEFAULT_TABLE
    }

    pub fn load(path: &Path) -> Result<PointTable, TableError> {
        let text = fs::read_to_string(path).map_err(|source| TableError::Io { path: path.to_path_buf(), source })?;
        PointTable::parse(&text)
    }

    pub fn parse(text: &str) -> Result<PointTable, TableError> {
        let mut version = None;
        let mut points = BTreeMap::new();
        let mut thresholds = Vec::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let syntax = |message: String| TableError::Syntax { line, message };
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') || l.starts_with(';') {
                continue;
            }
            if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                section = Some(name.trim().to_ascii_lowercase());
                continue;
            }
            let (key, value) = l.split_once('=').ok_or_else(|| syntax(format!("expected `key = value`, found `{l}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let Some(sec) = section.as_deref() else {
                return Err(syntax("entry outside any section".into()));
            };
            match sec {
                "table" => match key {
                    "version" => version = Some(value.to_string()),
                    _ => return Err(syntax(format!("unknown table key `{key}`"))),
                },
                "thresholds" => {
                    let min: u32 = key.parse().map_err(|_| syntax(format!("`{key}` is not a point count")))?;
                    let level: Level = value.parse().map_err(syntax)?;
                    thresholds.push((min, level));
                }
                _ => {
                    let dim = Dimension::ALL
                        .iter()
                        .copied()
                        .find(|d| d.name() == sec)
                        .ok_or_else(|| syntax(format!("unknown section [{sec}]")))?;
                    let name = dim
                        .value_names()
                        .into_iter()
                        .find(|n| *n == key)
                        .ok_or_else(|| syntax(format!("`{key}` is not a {sec} value")))?;
                    let p: u32 = value.parse().map_err(|_| syntax(format!("`{value}` is not a non-negative integer")))?;
                    if points.insert((dim, name), p).is_some() {
                        return Err(syntax(format!("`{key}` given twice in [{sec}]")));
                    }
                }
            }
        }
        for dim in Dimension::ALL {
            for name in dim.value_names() {
                if !points.contains_key(&(*dim, name)) {
                    return Err(TableError::MissingValue { section: dim.name().into(), value: name.into() });
                }
            }
        }
        thresholds.sort();
        if thresholds.first().map(|t| t.0) != Some(0) {
            return Err(TableError::Thresholds("must start at 0 points".into()));
        }
        for w in thresholds.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(TableError::Thresholds(format!("{} points listed twice", w[0].0)));
            }
            if w[1].1 < w[0].1 {
                return Err(TableError::Thresholds("levels must not decrease as points increase".into()));
            }
        }
        Ok(PointTable { version: version.ok_or(TableError::NoVersion)?, points, thresholds })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn points(&self, dim: Dimension, value: &str) -> u32 {
        self.points.get(&(dim, value)).copied().unwrap_or(0)
    }

    pub fn composition(&self, v: Composition) -> u32 {
        self.points(Dimension::Composition, v.name())
    }

    pub fn echogenicity(&self, v: Echogenicity) -> u32 {
        self.points(Dimension::Echogenicity, v.name())
    }

    pub fn shape(&self, v: Shape) -> u32 {
        self.points(Dimension::Shape, v.name())
    }

    pub fn margin(&self, v: Margin) -> u32 {
        self.points(Dimension::Margin, v.name())
    }

    pub fn focus(&self, v: Focus) -> u32 {
        self.points(Dimension::Foci, v.name())
    }

    pub fn level(&self, total: u32) -> Level {
        self.thresholds
            .iter()
            .rev()
            .find(|(min, _)| *min <= total)
            .map(|&(_, l)| l)
            .expect("thresholds start at 0")
    }

    pub fn thresholds(&self) -> &[(u32, Level)] {
        &self.thresholds
    }
}
