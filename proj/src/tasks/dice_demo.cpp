// SPDX-License-Identifier: Apache-2.0
#include "shopsim/errors.hpp"
#include "shopsim/rng.hpp"
#include "shopsim/tasks.hpp"

namespace shopsim {

namespace {

Histogram face_histogram(const std::vector<int>& values) {
    std::vector<std::size_t> counts(5, 0);
    for (int v : values) ++counts.at(static_cast<std::size_t>(v - 1));
    return Histogram::from_counts({"1", "2", "3", "4", "5"}, std::move(counts));
}

DiceRow score(std::string system, const std::vector<int>& predicted, const std::vector<int>& tosses, double epsilon) {
    DiceRow row;
    row.system = std::move(system);
    row.mse = aggregate_individual(predicted, tosses, [](int a, int h) { return (a - h) * (a - h); }).aggregate;
    row.accuracy = aggregate_individual(predicted, tosses, [](int a, int h) { return a == h ? 1 : 0; }).aggregate;
    row.kl = discrete_kl(face_histogram(tosses), face_histogram(predicted), epsilon);
    return row;
}

}  // namespace

std::vector<DiceRow> run_dice_demo(int n_tosses, double epsilon, std::uint64_t seed) {
    if (n_tosses <= 0) throw ValidationError("dice demo needs a positive number of tosses");
    Rng human(derive_seed(seed, "dice/human"));
    Rng system_b(derive_seed(seed, "dice/B"));
    std::vector<int> tosses, always_three, uniform;
    for (int i = 0; i < n_tosses; ++i) {
        tosses.push_back(human.uniform_int(1, 5));
        always_three.push_back(3);
        uniform.push_back(system_b.uniform_int(1, 5));
    }
    return {score("A", always_three, tosses, epsilon), score("B", uniform, tosses, epsilon)};
}

}  // namespace shopsim
