use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smokepatch::repository::{load_descriptors, load_repository, save_repository, Repository, RepositoryEntry};

const LOAD_BUDGET: Duration = Duration::from_secs(2);

#[test]
fn desk_scale_repository_loads_quickly() {
    let (entries, frames, dim, res) = (200, 60, 200, 24);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut repo = Repository::new(2, dim, res, 0.6);
    for e in 0..entries {
        let descs = (0..frames).map(|_| (0..dim).map(|_| rng.gen_range(-0.1..0.1)).collect()).collect();
        let blocks = (0..frames).map(|_| (0..res * res).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        repo.push(RepositoryEntry::from_raw(e, descs, blocks).unwrap()).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.sprep");
    save_repository(&path, &repo).unwrap();

    let t = Instant::now();
    let loaded = load_repository(&path).unwrap();
    let elapsed = t.elapsed();
    assert!(elapsed < LOAD_BUDGET, "load took {elapsed:?}");
    assert_eq!(loaded, repo);
    assert_eq!(loaded.frame_count(), entries as usize * frames);

    let t = Instant::now();
    let descriptors = load_descriptors(&path).unwrap();
    assert!(t.elapsed() < LOAD_BUDGET);
    assert!(descriptors.entries.iter().all(|e| e.density.is_none()));
    let index = descriptors.index().unwrap();
    let m = index.query(repo.descriptor(17, 5), 1).unwrap();
    assert_eq!((m[0].entry, m[0].frame, m[0].distance), (17, 5, 0.0));
}
