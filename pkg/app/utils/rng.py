import numpy as np


def trial_seed_sequence(master_seed: int, trial_index: int) -> np.random.SeedSequence:
    """Seed sequence for one trial, derived from (master seed, trial index)"""
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial_index),))


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(trial_seed_sequence(master_seed, trial_index)))


def trial_seed(master_seed: int, trial_index: int) -> int:
    """32-bit label of a trial's stream, recorded in result rows"""
    return int(trial_seed_sequence(master_seed, trial_index).generate_state(1, dtype=np.uint32)[0])
