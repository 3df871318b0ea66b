//! The uncertainty taxonomy: two categories, seven families, seventeen leaves.
//!
//! Epistemological families carry sub-leaves. Ontological families have none,
//! so for them the family doubles as the leaf.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Epistemological,
    Ontological,
}

impl Category {
    pub const ALL: [Category; 2] = [Category::Epistemological, Category::Ontological];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Model,
    Data,
    Inferential,
    Interpretational,
    Aleatory,
    ArchitecturalMorphing,
    Interaction,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Model,
        Family::Data,
        Family::Inferential,
        Family::Interpretational,
        Family::Aleatory,
        Family::ArchitecturalMorphing,
        Family::Interaction,
    ];

    pub fn category(self) -> Category {
        match self {
            Family::Model | Family::Data | Family::Inferential | Family::Interpretational => {
                Category::Epistemological
            }
            Family::Aleatory | Family::ArchitecturalMorphing | Family::Interaction => {
                Category::Ontological
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leaf {
    // model
    Structural,
    Behavioural,
    Parameter,
    Semantic,
    Applicability,
    // data
    Noise,
    Missing,
    SamplingBias,
    DistributionalShift,
    // inferential
    Prediction,
    Calibration,
    // interpretational
    SemanticAmbiguity,
    ExplanationUncertainty,
    InterpretationVariance,
    // ontological families, leaf = family
    Aleatory,
    ArchitecturalMorphing,
    Interaction,
}

impl Leaf {
    pub const ALL: [Leaf; 17] = [
        Leaf::Structural,
        Leaf::Behavioural,
        Leaf::Parameter,
        Leaf::Semantic,
        Leaf::Applicability,
        Leaf::Noise,
        Leaf::Missing,
        Leaf::SamplingBias,
        Leaf::DistributionalShift,
        Leaf::Prediction,
        Leaf::Calibration,
        Leaf::SemanticAmbiguity,
        Leaf::ExplanationUncertainty,
        Leaf::InterpretationVariance,
        Leaf::Aleatory,
        Leaf::ArchitecturalMorphing,
        Leaf::Interaction,
    ];

    /// The unique family a leaf belongs to.
    pub fn family(self) -> Family {
        use Leaf::*;
        match self {
            Structural | Behavioural | Parameter | Semantic | Applicability => Family::Model,
            Noise | Missing | SamplingBias | DistributionalShift => Family::Data,
            Prediction | Calibration => Family::Inferential,
            SemanticAmbiguity | ExplanationUncertainty | InterpretationVariance => {
                Family::Interpretational
            }
            Aleatory => Family::Aleatory,
            ArchitecturalMorphing => Family::ArchitecturalMorphing,
            Interaction => Family::Interaction,
        }
    }
}

/// Total validity check over raw taxonomy triples.
pub fn validate_kind(category: Category, family: Family, leaf: Leaf) -> bool {
    leaf.family() == family && family.category() == category
}

/// A validated `(category, family, leaf)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawKind", into = "RawKind")]
pub struct UncertaintyKind {
    leaf: Leaf,
}

#[derive(Serialize, Deserialize)]
struct RawKind {
    category: Category,
    family: Family,
    leaf: Leaf,
}

impl TryFrom<RawKind> for UncertaintyKind {
    type Error = ModelError;

    fn try_from(raw: RawKind) -> Result<Self, Self::Error> {
        UncertaintyKind::new(raw.category, raw.family, raw.leaf)
    }
}

impl From<UncertaintyKind> for RawKind {
    fn from(kind: UncertaintyKind) -> Self {
        RawKind {
            category: kind.category(),
            family: kind.family(),
            leaf: kind.leaf,
        }
    }
}

impl UncertaintyKind {
    pub fn new(category: Category, family: Family, leaf: Leaf) -> Result<Self, ModelError> {
        if validate_kind(category, family, leaf) {
            Ok(UncertaintyKind { leaf })
        } else {
            Err(ModelError::InvalidKind {
                category,
                family,
                leaf,
            })
        }
    }

    /// Every leaf determines its family and category.
    pub const fn from_leaf(leaf: Leaf) -> Self {
        UncertaintyKind { leaf }
    }

    pub fn category(self) -> Category {
        self.leaf.family().category()
    }

    pub fn family(self) -> Family {
        self.leaf.family()
    }

    pub fn leaf(self) -> Leaf {
        self.leaf
    }

    pub fn is_ontological(self) -> bool {
        self.category() == Category::Ontological
    }

    /// All seventeen legal kinds in declaration order.
    pub fn all() -> impl Iterator<Item = UncertaintyKind> {
        Leaf::ALL.into_iter().map(UncertaintyKind::from_leaf)
    }
}

impl fmt::Display for UncertaintyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}/{:?}/{:?}", self.category(), self.family(), self.leaf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_checks() {
        assert!(validate_kind(
            Category::Epistemological,
            Family::Inferential,
            Leaf::Prediction
        ));
        assert!(validate_kind(
            Category::Ontological,
            Family::Aleatory,
            Leaf::Aleatory
        ));
        assert!(!validate_kind(
            Category::Epistemological,
            Family::Data,
            Leaf::Structural
        ));
        assert!(!validate_kind(
            Category::Epistemological,
            Family::Aleatory,
            Leaf::Aleatory
        ));
    }

    // Hand-written validity table, independent of `Leaf::family`.
    const TABLE: [(Category, Family, Leaf); 17] = {
        use Category::*;
        [
            (Epistemological, Family::Model, Leaf::Structural),
            (Epistemological, Family::Model, Leaf::Behavioural),
            (Epistemological, Family::Model, Leaf::Parameter),
            (Epistemological, Family::Model, Leaf::Semantic),
            (Epistemological, Family::Model, Leaf::Applicability),
            (Epistemological, Family::Data, Leaf::Noise),
            (Epistemological, Family::Data, Leaf::Missing),
            (Epistemological, Family::Data, Leaf::SamplingBias),
            (Epistemological, Family::Data, Leaf::DistributionalShift),
            (Epistemological, Family::Inferential, Leaf::Prediction),
            (Epistemological, Family::Inferential, Leaf::Calibration),
            (Epistemological, Family::Interpretational, Leaf::SemanticAmbiguity),
            (Epistemological, Family::Interpretational, Leaf::ExplanationUncertainty),
            (Epistemological, Family::Interpretational, Leaf::InterpretationVariance),
            (Ontological, Family::Aleatory, Leaf::Aleatory),
            (Ontological, Family::ArchitecturalMorphing, Leaf::ArchitecturalMorphing),
            (Ontological, Family::Interaction, Leaf::Interaction),
        ]
    };

    #[test]
    fn exhaustive_enumeration_matches_table() {
        let mut valid = Vec::new();
        for c in Category::ALL {
            for f in Family::ALL {
                for l in Leaf::ALL {
                    if validate_kind(c, f, l) {
                        valid.push((c, f, l));
                    }
                }
            }
        }
        assert_eq!(valid.len(), 17);
        for row in TABLE {
            assert!(valid.contains(&row), "{row:?} missing");
        }
        for row in &valid {
            assert!(TABLE.contains(row), "{row:?} not in table");
        }
        let epistemological = valid
            .iter()
            .filter(|(c, _, _)| *c == Category::Epistemological)
            .count();
        assert_eq!(epistemological, 14);
    }

    #[test]
    fn deserialize_rejects_illegal_triple() {
        let bad = r#"{"category":"epistemological","family":"data","leaf":"structural"}"#;
        assert!(serde_json::from_str::<UncertaintyKind>(bad).is_err());
        let good = r#"{"category":"ontological","family":"interaction","leaf":"interaction"}"#;
        let kind: UncertaintyKind = serde_json::from_str(good).unwrap();
        assert_eq!(kind.leaf(), Leaf::Interaction);
    }

    #[test]
    fn kind_round_trips() {
        for kind in UncertaintyKind::all() {
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(serde_json::from_str::<UncertaintyKind>(&json).unwrap(), kind);
        }
    }
}
