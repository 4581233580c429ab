//! Semantic class ids and the 22-class driving taxonomy.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of classes in the default taxonomy.
pub const NUM_CLASSES: usize = 22;

/// Class names in canonical index order.
pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "Car",
    "Truck",
    "Bus",
    "Other Vehicle",
    "Motorcyclist",
    "Bicyclist",
    "Pedestrian",
    "Sign",
    "Traffic Light",
    "Pole",
    "Construction Cone",
    "Bicycle",
    "Motorcycle",
    "Building",
    "Vegetation",
    "Tree Trunk",
    "Curb",
    "Road",
    "Lane Marker",
    "Other Ground",
    "Walkable",
    "Sidewalk",
];

/// A semantic class index, or the [`ClassId::IGNORE`] sentinel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u32);

impl ClassId {
    /// Ground-truth-only sentinel, excluded from metrics.
    pub const IGNORE: ClassId = ClassId(255);

    pub const CAR: ClassId = ClassId(0);
    pub const TRUCK: ClassId = ClassId(1);
    pub const BUS: ClassId = ClassId(2);
    pub const OTHER_VEHICLE: ClassId = ClassId(3);
    pub const MOTORCYCLIST: ClassId = ClassId(4);
    pub const BICYCLIST: ClassId = ClassId(5);
    pub const PEDESTRIAN: ClassId = ClassId(6);
    pub const SIGN: ClassId = ClassId(7);
    pub const TRAFFIC_LIGHT: ClassId = ClassId(8);
    pub const POLE: ClassId = ClassId(9);
    pub const CONSTRUCTION_CONE: ClassId = ClassId(10);
    pub const BICYCLE: ClassId = ClassId(11);
    pub const MOTORCYCLE: ClassId = ClassId(12);
    pub const BUILDING: ClassId = ClassId(13);
    pub const VEGETATION: ClassId = ClassId(14);
    pub const TREE_TRUNK: ClassId = ClassId(15);
    pub const CURB: ClassId = ClassId(16);
    pub const ROAD: ClassId = ClassId(17);
    pub const LANE_MARKER: ClassId = ClassId(18);
    pub const OTHER_GROUND: ClassId = ClassId(19);
    pub const WALKABLE: ClassId = ClassId(20);
    pub const SIDEWALK: ClassId = ClassId(21);

    #[inline]
    pub fn is_ignore(self) -> bool {
        self == Self::IGNORE
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Name in the default taxonomy, if any.
    pub fn name(self) -> Option<&'static str> {
        if self.is_ignore() {
            Some("IGNORE")
        } else {
            CLASS_NAMES.get(self.index()).copied()
        }
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            Some(n) => write!(f, "{n}"),
            None => write!(f, "class#{}", self.0),
        }
    }
}

/// Movable "thing" classes used as the default instance-paste set.
pub fn default_instance_classes() -> Vec<ClassId> {
    vec![
        ClassId::CAR,
        ClassId::TRUCK,
        ClassId::BUS,
        ClassId::OTHER_VEHICLE,
        ClassId::MOTORCYCLIST,
        ClassId::BICYCLIST,
        ClassId::PEDESTRIAN,
        ClassId::BICYCLE,
        ClassId::MOTORCYCLE,
        ClassId::CONSTRUCTION_CONE,
    ]
}
