//! Compiles and runs every code block in the guide.

macro_rules! chapters {
    ($($name:ident => $file:literal),* $(,)?) => {
        $(
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            pub mod $name {}
        )*
    };
}

chapters! {
    introduction => "introduction.md",
    states => "states.md",
    policies => "policies.md",
    contextuality => "contextuality.md",
    signaling => "signaling.md",
    energy => "energy.md",
    sat => "sat.md",
    agents => "agents.md",
    behavior => "behavior.md",
    experiments => "experiments.md",
}
