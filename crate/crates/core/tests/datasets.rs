use std::collections::HashSet;
use std::path::PathBuf;

use evodt::dataset::{load_csv, LabelColumn, Registry};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn registry() -> Registry {
    Registry::builtin().with_mirror(data_dir().to_str().unwrap())
}

fn wins(b: &[u8; 9], p: u8) -> bool {
    const LINES: [[usize; 3]; 8] = [
        [0, 1, 2],
        [3, 4, 5],
        [6, 7, 8],
        [0, 3, 6],
        [1, 4, 7],
        [2, 5, 8],
        [0, 4, 8],
        [2, 4, 6],
    ];
    LINES.iter().any(|l| l.iter().all(|&i| b[i] == p))
}

/// Every board at which a game with x moving first has just ended, with
/// whether x won.
fn terminal_boards() -> HashSet<([u8; 9], bool)> {
    fn play(b: &mut [u8; 9], turn: u8, out: &mut HashSet<([u8; 9], bool)>) {
        let full = b.iter().all(|&c| c != b'b');
        if wins(b, b'x') || wins(b, b'o') || full {
            out.insert((*b, wins(b, b'x')));
            return;
        }
        for i in 0..9 {
            if b[i] == b'b' {
                b[i] = turn;
                play(b, if turn == b'x' { b'o' } else { b'x' }, out);
                b[i] = b'b';
            }
        }
    }
    let mut out = HashSet::new();
    play(&mut [b'b'; 9], b'x', &mut out);
    out
}

#[test]
fn tic_tac_toe_file_is_the_set_of_finished_games() {
    let expected = terminal_boards();
    assert_eq!(expected.len(), 958);
    let text = std::fs::read_to_string(data_dir().join("tic-tac-toe.data")).unwrap();
    let mut seen = HashSet::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        let board: [u8; 9] = std::array::from_fn(|i| cells[i].as_bytes()[0]);
        seen.insert((board, cells[9] == "positive"));
    }
    assert_eq!(seen, expected);
}

#[test]
fn tic_tac_toe_loads_with_ordinal_cells() {
    let cache = tempfile::tempdir().unwrap();
    let d = registry().load("tic-tac-toe", cache.path()).unwrap();
    assert_eq!((d.n_samples(), d.n_features(), d.n_classes()), (958, 9, 2));
    assert_eq!(d.row(0), &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    assert!(d.features().iter().all(|v| [0.0, 0.5, 1.0].contains(v)));
    assert_eq!(d.class_totals(), vec![626.0, 332.0]);
}

#[test]
fn iris_and_haberman_shapes() {
    let cache = tempfile::tempdir().unwrap();
    let iris = registry().load("iris", cache.path()).unwrap();
    assert_eq!((iris.n_samples(), iris.n_features()), (150, 4));
    assert_eq!(iris.class_totals(), vec![50.0; 3]);
    assert_eq!(iris.class_names()[0], "Iris-setosa");

    let haberman = registry().load("haberman", cache.path()).unwrap();
    assert_eq!((haberman.n_samples(), haberman.n_features()), (306, 3));
    let mut totals = haberman.class_totals();
    totals.sort_by(f64::total_cmp);
    assert_eq!(totals, vec![81.0, 225.0]);
}

#[test]
fn direct_csv_load_matches_registry_load() {
    let cache = tempfile::tempdir().unwrap();
    let raw = load_csv(data_dir().join("iris.data"), LabelColumn::Last).unwrap();
    let direct = evodt::dataset::Dataset::from_raw(&raw).unwrap();
    assert_eq!(direct, registry().load("iris", cache.path()).unwrap());
}
