//! Approximate minimum degree ordering on the quotient graph of `A + Aᵀ`.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Node {
    Var,
    Elem,
    Merged,
    Dead,
}

/// Symmetric adjacency of `A + Aᵀ` without the diagonal.
pub(crate) fn symmetric_pattern(n: usize, col_ptr: &[usize], row_idx: &[usize]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for j in 0..n {
        for &i in &row_idx[col_ptr[j]..col_ptr[j + 1]] {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Elimination order (`perm[k]` is the index eliminated at step `k`).
pub fn minimum_degree(n: usize, col_ptr: &[usize], row_idx: &[usize]) -> Vec<usize> {
    let mut vadj = symmetric_pattern(n, col_ptr, row_idx);
    let mut eadj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut evars: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut kind = vec![Node::Var; n];
    let mut nv = vec![1usize; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut deg: Vec<usize> = vadj.iter().map(Vec::len).collect();
    let mut heap: BTreeSet<(usize, usize)> = (0..n).map(|i| (deg[i], i)).collect();
    let mut mark = vec![0usize; n];
    let mut wmark = vec![0usize; n];
    let mut w = vec![0usize; n];
    let mut stamp = 0usize;
    let mut nleft = n;
    let mut order = Vec::with_capacity(n);

    while let Some((_, p)) = heap.pop_first() {
        stamp += 1;
        mark[p] = stamp;
        let mut lp = Vec::new();
        for &v in &vadj[p] {
            if kind[v] == Node::Var && mark[v] != stamp {
                mark[v] = stamp;
                lp.push(v);
            }
        }
        let absorbed = core::mem::take(&mut eadj[p]);
        for &e in &absorbed {
            if kind[e] != Node::Elem {
                continue;
            }
            for &v in &evars[e] {
                if kind[v] == Node::Var && mark[v] != stamp {
                    mark[v] = stamp;
                    lp.push(v);
                }
            }
            kind[e] = Node::Dead;
            evars[e] = Vec::new();
        }
        vadj[p] = Vec::new();
        kind[p] = Node::Elem;
        order.extend_from_slice(&members[p]);
        nleft -= nv[p];
        members[p] = Vec::new();
        let lp_weight: usize = lp.iter().map(|&v| nv[v]).sum();
        evars[p] = lp.clone();

        for &i in &lp {
            heap.remove(&(deg[i], i));
            eadj[i].retain(|&e| kind[e] == Node::Elem);
            eadj[i].push(p);
            vadj[i].retain(|&v| kind[v] == Node::Var && mark[v] != stamp);
        }

        // w[e] = weight of Le \ Lp for every element reachable from Lp.
        let mut touched = Vec::new();
        for &i in &lp {
            for &e in &eadj[i] {
                if e == p {
                    continue;
                }
                if wmark[e] != stamp {
                    wmark[e] = stamp;
                    evars[e].retain(|&v| kind[v] == Node::Var);
                    w[e] = evars[e].iter().map(|&v| nv[v]).sum();
                    touched.push(e);
                }
                w[e] -= nv[i];
            }
        }
        for &e in &touched {
            if w[e] == 0 {
                kind[e] = Node::Dead;
                evars[e] = Vec::new();
            }
        }

        for &i in &lp {
            eadj[i].retain(|&e| kind[e] == Node::Elem);
            let own = nv[i];
            let a_i: usize = vadj[i].iter().map(|&v| nv[v]).sum();
            let ext: usize = eadj[i].iter().filter(|&&e| e != p).map(|&e| w[e]).sum();
            let others = lp_weight - own;
            let bound = (nleft - own).min(deg[i] + others).min(a_i + others + ext);
            deg[i] = bound;
        }

        // Merge indistinguishable variables of Lp into supervariables.
        let mut keyed: Vec<(usize, usize)> = lp
            .iter()
            .map(|&i| {
                let h = eadj[i]
                    .iter()
                    .chain(vadj[i].iter())
                    .fold(0usize, |acc, &x| acc.wrapping_add(x));
                (h, i)
            })
            .collect();
        keyed.sort_unstable();
        for &(_, i) in &keyed {
            eadj[i].sort_unstable();
            vadj[i].sort_unstable();
        }
        let mut a = 0;
        while a < keyed.len() {
            let mut b = a + 1;
            while b < keyed.len() && keyed[b].0 == keyed[a].0 {
                b += 1;
            }
            for x in a..b {
                let i = keyed[x].1;
                if kind[i] != Node::Var {
                    continue;
                }
                for &(_, j) in &keyed[x + 1..b] {
                    if kind[j] != Node::Var {
                        continue;
                    }
                    if eadj[i] == eadj[j] && vadj[i] == vadj[j] {
                        nv[i] += nv[j];
                        deg[i] = deg[i].saturating_sub(nv[j]);
                        let moved = core::mem::take(&mut members[j]);
                        members[i].extend(moved);
                        kind[j] = Node::Merged;
                        eadj[j] = Vec::new();
                        vadj[j] = Vec::new();
                    }
                }
            }
            a = b;
        }

        for &i in &lp {
            if kind[i] == Node::Var {
                heap.insert((deg[i], i));
            }
        }
    }
    order
}
