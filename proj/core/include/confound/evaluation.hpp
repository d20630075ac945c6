#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "confound/record.hpp"
#include "confound/rng.hpp"
#include "confound/stats.hpp"

namespace confound {

/// Patient-disjoint, class-stratified k-fold partition: fold f's test side
/// is every record in group f, its dev side the rest.
std::vector<FoldSplit> make_folds(std::span<const Record> records, std::size_t k, Seed seed);

/// Runs the pipeline on every fold and summarises i.i.d. and o.o.d. AUCs
/// with 95% t-intervals. Throws if there are fewer patients than folds.
EvalReport kfold_eval(std::span<const Record> records, std::size_t k, const FoldPipeline& pipeline, Seed seed);

}  // namespace confound
