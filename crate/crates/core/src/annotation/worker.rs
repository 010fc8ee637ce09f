use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{field}: {reason}")]
pub struct DemographicsError {
    pub field: &'static str,
    pub reason: String,
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!(
                        "'{s}' is not one of {}",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_enum!(Gender {
    Male => "male",
    Female => "female",
    Other => "other",
});

string_enum!(AgeBracket {
    From18To24 => "18-24",
    From25To31 => "25-31",
    From32To38 => "32-38",
    From39To45 => "39-45",
    From46To52 => "46-52",
    From53To59 => "53-59",
    From60 => "60+",
});

string_enum!(
    /// Annual income in EUR.
    IncomeBracket {
        Below10k => "<10k",
        From10kTo20k => "10k-20k",
        From20kTo30k => "20k-30k",
        From30kTo50k => "30k-50k",
        From50kTo75k => "50k-75k",
        From75kTo100k => "75k-100k",
        Above100k => ">100k",
    }
);

string_enum!(EducationLevel {
    Primary => "primary",
    Secondary => "secondary",
    Bachelor => "bachelor",
    Master => "master",
    Phd => "phd",
});

/// ISO 3166-1 alpha-2 country code, stored uppercase.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Nationality(String);

impl Nationality {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for Nationality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 2 && s.chars().all(|c| c.is_ascii_alphabetic()) {
            Ok(Nationality(s.to_ascii_uppercase()))
        } else {
            Err(format!("'{s}' is not a two-letter ISO 3166-1 country code"))
        }
    }
}

impl<'de> Deserialize<'de> for Nationality {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub gender: Gender,
    pub age_bracket: AgeBracket,
    pub income_bracket: IncomeBracket,
    pub education_level: EducationLevel,
    pub nationality: Nationality,
}

/// Unvalidated demographics as submitted by a client.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct DemographicsForm {
    pub gender: Option<String>,
    pub age_bracket: Option<String>,
    pub income_bracket: Option<String>,
    pub education_level: Option<String>,
    pub nationality: Option<String>,
}

fn field<T: FromStr<Err = String>>(
    name: &'static str,
    value: &Option<String>,
) -> Result<T, DemographicsError> {
    let raw = value
        .as_deref()
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .ok_or(DemographicsError {
            field: name,
            reason: "missing".into(),
        })?;
    raw.parse().map_err(|reason| DemographicsError {
        field: name,
        reason,
    })
}

impl DemographicsForm {
    pub fn validate(&self) -> Result<Demographics, DemographicsError> {
        Ok(Demographics {
            gender: field("gender", &self.gender)?,
            age_bracket: field("age_bracket", &self.age_bracket)?,
            income_bracket: field("income_bracket", &self.income_bracket)?,
            education_level: field("education_level", &self.education_level)?,
            nationality: field("nationality", &self.nationality)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerProfile {
    pub worker_id: String,
    pub demographics: Demographics,
    pub definitions_acknowledged: bool,
}
