//! Scenario files shipped inside the binary.

use qradar_core::channel::ChannelPreset;

pub const SCENARIOS: [(&str, &str); 9] = [
    (
        "eom_temperature",
        include_str!("../presets/eom_temperature.json"),
    ),
    (
        "eom_wavelength",
        include_str!("../presets/eom_wavelength.json"),
    ),
    ("oe_detuning", include_str!("../presets/oe_detuning.json")),
    ("oe_coupling", include_str!("../presets/oe_coupling.json")),
    ("oe_link", include_str!("../presets/oe_link.json")),
    ("jpa_gain", include_str!("../presets/jpa_gain.json")),
    (
        "jpa_squeezing",
        include_str!("../presets/jpa_squeezing.json"),
    ),
    ("channel_neff", include_str!("../presets/channel_neff.json")),
    ("qi_roc", include_str!("../presets/qi_roc.json")),
];

pub fn scenario(name: &str) -> Option<&'static str> {
    SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

pub fn channel(name: &str) -> Option<ChannelPreset> {
    ChannelPreset::from_name(name)
}

/// Closest preset name, for error messages.
pub fn nearest(name: &str) -> Option<&'static str> {
    SCENARIOS
        .iter()
        .map(|(n, _)| *n)
        .chain(ChannelPreset::ALL.iter().map(|p| p.name()))
        .map(|n| (strsim::levenshtein(name, n), n))
        .filter(|(d, n)| *d <= 3.max(n.len() / 3))
        .min()
        .map(|(_, n)| n)
}
