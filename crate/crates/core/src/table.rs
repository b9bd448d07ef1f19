//! Dense table indexing shared by potentials, marginals and enumeration.
//!
//! Every table over an ordered variable list is flattened with the last
//! listed variable varying fastest.

/// Number of entries of a table over `vars`.
pub fn table_len(vars: &[usize], cards: &[usize]) -> usize {
    vars.iter().map(|&v| cards[v]).product()
}

/// Row-major strides for `vars` (last variable has stride 1).
pub fn strides(vars: &[usize], cards: &[usize]) -> Vec<usize> {
    let mut out = vec![0; vars.len()];
    let mut acc = 1;
    for (k, &v) in vars.iter().enumerate().rev() {
        out[k] = acc;
        acc *= cards[v];
    }
    out
}

/// Flat index of the sub-configuration of `config` restricted to `vars`.
#[inline]
pub fn flat_index(vars: &[usize], cards: &[usize], config: &[usize]) -> usize {
    let mut idx = 0;
    for &v in vars {
        idx = idx * cards[v] + config[v];
    }
    idx
}

/// Inverse of [`flat_index`]: writes the states encoded by `idx` into `config`.
pub fn unflatten(vars: &[usize], cards: &[usize], mut idx: usize, config: &mut [usize]) {
    for &v in vars.iter().rev() {
        config[v] = idx % cards[v];
        idx /= cards[v];
    }
}

/// Calls `f` once for every joint assignment of `vars`, writing the states
/// into `config` (other entries are left untouched). Order matches the flat
/// table order. An empty `vars` yields a single call.
pub fn for_each_config<F: FnMut(&[usize])>(
    vars: &[usize],
    cards: &[usize],
    config: &mut [usize],
    mut f: F,
) {
    for &v in vars {
        config[v] = 0;
    }
    loop {
        f(config);
        let mut k = vars.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            let v = vars[k];
            config[v] += 1;
            if config[v] < cards[v] {
                break;
            }
            config[v] = 0;
        }
    }
}
