//! Best-known container radii for the benchmark instances, exactly as
//! published (ten decimals).

const TABLE: &[(usize, &str)] = &[
    (100, "11.0821497243"),
    (200, "15.4632748785"),
    (210, "15.8792012772"),
    (220, "16.2253735494"),
    (230, "16.5964300724"),
    (240, "16.8971658948"),
    (250, "17.2629622393"),
    (260, "17.6049551932"),
    (270, "17.8872656677"),
    (280, "18.2472267427"),
    (290, "18.5493750704"),
    (300, "18.8135833638"),
    (310, "19.1848594632"),
    (320, "19.4562307640"),
    (400, "21.6895717951"),
    (500, "24.1329376240"),
    (600, "26.4274162694"),
    (700, "28.4958443164"),
    (800, "30.4212133790"),
    (900, "32.2330843545"),
    (1000, "33.9571409147"),
    (1100, "35.6161932968"),
    (1200, "37.1121608416"),
    (1300, "38.6047666608"),
    (1400, "40.0604065845"),
    (1500, "41.4126836805"),
];

pub struct RadiusTable;

impl RadiusTable {
    pub fn lookup(n: usize) -> Option<f64> {
        Self::printed(n).map(|s| s.parse().expect("table entries are valid numbers"))
    }

    /// The radius as printed, for display and exact comparison.
    pub fn printed(n: usize) -> Option<&'static str> {
        TABLE
            .binary_search_by_key(&n, |&(k, _)| k)
            .ok()
            .map(|i| TABLE[i].1)
    }

    pub fn entries() -> impl Iterator<Item = (usize, f64)> {
        TABLE.iter().map(|&(n, s)| (n, s.parse().unwrap()))
    }

    pub fn len() -> usize {
        TABLE.len()
    }
}
