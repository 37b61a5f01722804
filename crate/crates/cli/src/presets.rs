use outer_ppo::presets::{preset, preset_names};

use crate::args::PresetsArgs;
use crate::{config_error, write_atomic, EXIT_OK};

pub fn run(args: &PresetsArgs) -> anyhow::Result<i32> {
    let Some(name) = &args.name else {
        for n in preset_names() {
            println!("{n}");
        }
        return Ok(EXIT_OK);
    };
    let text = preset(name).map_err(config_error)?.to_json();
    match &args.out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}
