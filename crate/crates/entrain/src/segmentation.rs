pub const FUNCTIONAL_NAMES: [&str; 1] = ["x"];
