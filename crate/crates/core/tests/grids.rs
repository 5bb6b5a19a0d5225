use std::path::PathBuf;

use gxe_core::simulation::{builtin_grid, load_grid};

fn grid_file(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "grids", name].iter().collect();
    path.to_str().unwrap().to_string()
}

#[test]
fn failure_file_matches_builtin() {
    let from_file = load_grid(&grid_file("failure.grid")).unwrap();
    assert_eq!(from_file, builtin_grid("failure").unwrap());
}

#[test]
fn example_file_parses() {
    let grid = load_grid(&grid_file("example.grid")).unwrap();
    assert_eq!(grid.len(), 3);
    assert_eq!(grid[2].n_cases, 2000);
    assert_eq!(grid[1].target_reri().unwrap(), 0.3);
    assert_eq!(grid[0].n_cases, 4000);
}
