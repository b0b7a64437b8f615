//! Default inventory: ten city parks and two nature tourism parks in
//! Palembang.
//!
//! Marker and boundary coordinates are placeholder fixtures inside
//! [`PALEMBANG_BBOX`], not surveyed locations.

use crate::model::Category;

/// `(min_lon, min_lat, max_lon, max_lat)` of the fixture area.
pub const PALEMBANG_BBOX: (f64, f64, f64, f64) = (104.60, -3.10, 104.90, -2.85);

pub struct SeedSpace {
    pub name: &'static str,
    pub category: Category,
    pub marker: [f64; 2],
    pub boundary: Option<&'static [[f64; 2]]>,
    pub description: &'static str,
    pub facilities: &'static [&'static str],
}

const KAMBANG_IWAK_RING: &[[f64; 2]] = &[
    [104.7448, -2.9856],
    [104.7482, -2.9856],
    [104.7484, -2.9832],
    [104.7446, -2.9830],
    [104.7448, -2.9856],
];

const PUNDI_KAYU_RING: &[[f64; 2]] = &[
    [104.7250, -2.9440],
    [104.7330, -2.9445],
    [104.7335, -2.9380],
    [104.7260, -2.9372],
    [104.7250, -2.9440],
];

pub const SEED_SPACES: [SeedSpace; 12] = [
    SeedSpace {
        name: "Taman Gelora Sriwijaya",
        category: Category::CityPark,
        marker: [104.7883, -3.0222],
        boundary: None,
        description: "Park grounds around the Gelora Sriwijaya stadium in Jakabaring.",
        facilities: &["jogging track", "parking"],
    },
    SeedSpace {
        name: "Taman Dekranasda",
        category: Category::CityPark,
        marker: [104.7512, -2.9801],
        boundary: None,
        description: "",
        facilities: &[],
    },
    SeedSpace {
        name: "Taman Kampung Kapiten",
        category: Category::CityPark,
        marker: [104.7661, -3.0004],
        boundary: None,
        description: "Riverside park beside the historic Kapitan houses.",
        facilities: &[],
    },
    SeedSpace {
        name: "Taman Benteng Kuto Besak",
        category: Category::CityPark,
        marker: [104.7607, -2.9925],
        boundary: None,
        description: "Open plaza in front of the Kuto Besak fort on the Musi river.",
        facilities: &["seating", "food stalls"],
    },
    SeedSpace {
        name: "Taman Monpera",
        category: Category::CityPark,
        marker: [104.7622, -2.9889],
        boundary: None,
        description: "Garden around the Monpera monument.",
        facilities: &[],
    },
    SeedSpace {
        name: "Taman Bawah Jembatan Ampera",
        category: Category::CityPark,
        marker: [104.7636, -2.9920],
        boundary: None,
        description: "",
        facilities: &[],
    },
    SeedSpace {
        name: "Taman Masjid Agung",
        category: Category::CityPark,
        marker: [104.7610, -2.9877],
        boundary: None,
        description: "",
        facilities: &[],
    },
    SeedSpace {
        name: "Taman Kambang Iwak",
        category: Category::CityPark,
        marker: [104.7465, -2.9844],
        boundary: Some(KAMBANG_IWAK_RING),
        description: "Lakeside park with a walking loop.",
        facilities: &["jogging track", "playground", "toilets"],
    },
    SeedSpace {
        name: "Taman Masjid Taqwa",
        category: Category::CityPark,
        marker: [104.7538, -2.9856],
        boundary: None,
        description: "",
        facilities: &[],
    },
    SeedSpace {
        name: "Taman POM IX",
        category: Category::CityPark,
        marker: [104.7410, -2.9717],
        boundary: None,
        description: "",
        facilities: &["sports field"],
    },
    SeedSpace {
        name: "Taman Wisata Alam Pundi Kayu",
        category: Category::NatureTourismPark,
        marker: [104.7292, -2.9410],
        boundary: Some(PUNDI_KAYU_RING),
        description: "Pine forest recreation area.",
        facilities: &["picnic area", "parking"],
    },
    SeedSpace {
        name: "Taman Wisata Alam Pulau Kemaro",
        category: Category::NatureTourismPark,
        marker: [104.8286, -2.9790],
        boundary: None,
        description: "River island with a pagoda, reached by boat.",
        facilities: &["pier"],
    },
];
