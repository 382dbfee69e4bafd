pub const FEATURE_NAMES: [&str; 1] = ["x"];
