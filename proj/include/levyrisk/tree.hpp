// Exact backward induction for discrete BSDEs on small probability trees.
// Ground truth for the comparison and risk-axiom batteries: conditional
// expectations are finite sums over branch probabilities, no sampling error.

#ifndef LEVYRISK_TREE_HPP
#define LEVYRISK_TREE_HPP

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "levyrisk/bsde.hpp"

namespace levyrisk {

// One branch of the per-step transition: probability, Brownian increment and
// per-atom jump counts. Branches repeat i.i.d. across steps.
struct TreeBranch {
    double prob = 0.0;
    double db = 0.0;
    std::vector<int> jumps;
};

struct TreeModel {
    int n_steps = 1;  // <= 12
    double dt = 1.0;
    std::vector<TreeBranch> branches;
    std::vector<double> intensities; // lambda_j, compensate the jump counts

    int n_branches() const { return static_cast<int>(branches.size()); }
    int n_atoms() const { return static_cast<int>(intensities.size()); }
    long nodes_at(int level) const;

    // Rejects probabilities not summing to 1 within 1e-12, n_steps outside
    // [1, 12], and uncompensatable martingale increments (E[db] != 0 or
    // E[count_j] != lambda_j dt), which would break the discrete recursion's
    // translation and comparison structure.
    void validate() const;

    // Symmetric two-branch tree with db = +-sqrt(dt), no jumps.
    static TreeModel binomial(int n_steps, double dt);
};

// Terminal value as a function of the path of branch indices (length = level
// of the node it is evaluated at).
using TreeClaim = std::function<double(std::span<const int>)>;

struct TreeSolution {
    std::vector<Eigen::VectorXd> Y;               // levels 0..terminal_step
    std::vector<Eigen::VectorXd> Z;               // levels 0..terminal_step-1
    std::vector<std::vector<Eigen::VectorXd>> K;  // [level][atom]
    double Y0 = 0.0;
    int terminal_step = 0;
};

// Exact discrete BSDE values by enumeration of all nodes. The recursion at
// each node is
//   Z = E[Y' db]/dt,  K_j = E[Y' (dN_j - lambda_j dt)]/(lambda_j dt),
//   Y = E[Y'] + g(t, Y, Z, K) dt   (implicit in Y, iterated to 1e-15),
// with expectations over the branch set. terminal_step < n_steps solves the
// stopped equation with the claim read at that level.
TreeSolution solve_tree(const Driver& driver, const TreeClaim& terminal,
                        const TreeModel& tree, int terminal_step = -1);

// Decodes the branch-index path of node `index` at `level` (digit s = step s).
std::vector<int> tree_path(const TreeModel& tree, int level, long index);

} // namespace levyrisk

#endif
