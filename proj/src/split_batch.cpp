// Data-parallel split over a scenario set.
//
// Scenarios are processed in tiles of `tile_size`, and each tile is cut into
// lane blocks of kLanes scenarios. A thread takes one block at a time and,
// in its own scratch:
//   1. permutes every scenario to tour order, prefix-sums it, and gives each
//      state its window of admissible route starts;
//   2. runs the masked recursion on the block stored state-major, so that
//      each DP layer is a masked min-plus matrix-vector step over the lanes.
// Each lane follows exactly the arithmetic of split_masked, so results do not
// depend on block composition, tile size, or thread count.

#include <algorithm>
#include <chrono>
#include <memory>
#include <new>
#include <vector>

#include <omp.h>

#include "cvrpsd/error.hpp"
#include "cvrpsd/parallel.hpp"
#include "cvrpsd/split.hpp"
#include "split_detail.hpp"

namespace cvrpsd {

MaskMatrix compute_masks(const PrefixMatrix& prefix, std::int64_t capacity, int workers) {
  if (prefix.cols() == 0) throw DataError("prefix matrix must have at least one column");
  MaskMatrix mask(prefix.rows(), prefix.cols() - 1);
  const auto rows = static_cast<std::int64_t>(prefix.rows());
#pragma omp parallel for schedule(static) num_threads(resolve_workers(workers))
  for (std::int64_t w = 0; w < rows; ++w) {
    compute_mask_row(prefix.row(static_cast<std::size_t>(w)), capacity,
                     mask.row(static_cast<std::size_t>(w)));
  }
  return mask;
}

namespace {

constexpr std::size_t kLanes = 32;

// Scratch for one lane block, state-major then lane. Every cell is written
// before it is read, so the storage is left uninitialized.
template <typename V>
struct BlockScratch {
  std::unique_ptr<V[]> f;
  std::unique_ptr<std::int32_t[]> begin;
  std::unique_ptr<std::int64_t[]> load;  // tour-order prefix loads
  std::unique_ptr<std::int32_t[]> args;

  BlockScratch(std::size_t states, bool record) {
    const std::size_t cells = states * kLanes;
    f.reset(new V[cells]);
    begin.reset(new std::int32_t[cells]);
    load.reset(new std::int64_t[cells]);
    if (record) args.reset(new std::int32_t[cells]);
  }
};

template <typename V, bool kPenalized, bool kRecord>
void run_block(const detail::SegmentCosts<V>& seg, std::size_t n, std::int64_t capacity,
               V* __restrict f, const std::int32_t* __restrict begin,
               const std::int64_t* __restrict load, std::int32_t* __restrict arg_out) {
  constexpr V inf = detail::infinity<V>();
  const std::size_t states = n + 1;
  for (std::size_t lane = 0; lane < kLanes; ++lane) f[lane] = V{};

  alignas(64) V best[kLanes];
  alignas(64) std::int32_t arg[kLanes];
  for (std::size_t i = 1; i < states; ++i) {
    const std::int32_t* row_begin = begin + i * kLanes;
    std::int32_t lo = static_cast<std::int32_t>(i);
    for (std::size_t lane = 0; lane < kLanes; ++lane) lo = std::min(lo, row_begin[lane]);

    for (std::size_t lane = 0; lane < kLanes; ++lane) {
      best[lane] = inf;
      arg[lane] = kNoPredecessor;
    }
    for (std::int32_t p = lo; p < static_cast<std::int32_t>(i); ++p) {
      const V t = seg.transition(static_cast<std::size_t>(p), i);
      const V* fp = f + static_cast<std::size_t>(p) * kLanes;
#pragma omp simd
      for (std::size_t lane = 0; lane < kLanes; ++lane) {
        V cand = fp[lane] + t;
        if constexpr (kPenalized) {
          cand = cand + seg.penalty(load[i * kLanes + lane] - load[static_cast<std::size_t>(p) * kLanes + lane],
                                    capacity);
        }
        cand = p >= row_begin[lane] ? cand : inf;
        const bool take = (cand <= best[lane]) & (cand < inf);
        best[lane] = take ? cand : best[lane];
        if constexpr (kRecord) arg[lane] = take ? p : arg[lane];
      }
    }
    V* fi = f + i * kLanes;
    for (std::size_t lane = 0; lane < kLanes; ++lane) fi[lane] = best[lane];
    if constexpr (kRecord) {
      for (std::size_t lane = 0; lane < kLanes; ++lane) arg_out[i * kLanes + lane] = arg[lane];
    }
  }
}

// Window starts for one lane block. Start p is excluded at state i when its
// segment is over capacity (strict) or its penalty alone exceeds an upper
// bound on the optimum (penalized). Either way the excluded starts at i form
// a prefix [0, begin_i) that contains the prefix excluded at i-1, so begin_i
// is the lowest begin_{i-1} over the block plus a count over the rest.
//
// The penalized bound is the cost of serving every customer alone,
// computed with the recursion's own arithmetic. It bounds f(i) from above for
// every i, so an excluded start can never be the argmin.
template <typename V>
void fill_windows(const detail::SegmentCosts<V>& seg, std::size_t n, std::int64_t capacity,
                  bool penalized, std::size_t lanes, const std::int64_t* __restrict load,
                  std::int32_t* __restrict begin) {
  const std::size_t states = n + 1;
  alignas(64) V bound[kLanes];
  alignas(64) std::int32_t cnt[kLanes];
  if (penalized) {
    for (std::size_t lane = 0; lane < kLanes; ++lane) bound[lane] = V{};
    for (std::size_t i = 1; i < states; ++i) {
      const V t = seg.transition(i - 1, i);
      const std::int64_t* cur = load + i * kLanes;
      const std::int64_t* prev = load + (i - 1) * kLanes;
#pragma omp simd
      for (std::size_t lane = 0; lane < kLanes; ++lane) {
        bound[lane] = (bound[lane] + t) + seg.penalty(cur[lane] - prev[lane], capacity);
      }
    }
  }

  for (std::size_t lane = 0; lane < kLanes; ++lane) begin[lane] = 0;
  for (std::size_t i = 1; i < states; ++i) {
    const std::int32_t* before = begin + (i - 1) * kLanes;
    std::int32_t* row = begin + i * kLanes;
    std::int32_t lo = static_cast<std::int32_t>(i);
    for (std::size_t lane = 0; lane < kLanes; ++lane) lo = std::min(lo, before[lane]);
    for (std::size_t lane = 0; lane < kLanes; ++lane) cnt[lane] = lo;
    const std::int64_t* cur = load + i * kLanes;
    for (std::size_t p = static_cast<std::size_t>(lo); p < i; ++p) {
      const std::int64_t* lp = load + p * kLanes;
      if (penalized) {
#pragma omp simd
        for (std::size_t lane = 0; lane < kLanes; ++lane) {
          cnt[lane] += seg.penalty(cur[lane] - lp[lane], capacity) > bound[lane] ? 1 : 0;
        }
      } else {
#pragma omp simd
        for (std::size_t lane = 0; lane < kLanes; ++lane) {
          cnt[lane] += cur[lane] - lp[lane] > capacity ? 1 : 0;
        }
      }
    }
    for (std::size_t lane = 0; lane < kLanes; ++lane) {
      row[lane] = lane < lanes ? cnt[lane] : static_cast<std::int32_t>(i);
    }
  }
}

template <typename V>
void batch_impl(const GiantTour& tour, DemandMatrixView demands, std::int64_t capacity,
                const SplitOptions& options, int workers, SplitBatchResult& result) {
  const std::size_t n = tour.size();
  const std::size_t m = demands.rows();
  const std::size_t states = n + 1;
  const bool penalized = options.mode.is_penalized();
  const bool record = options.record_predecessors;
  const detail::SegmentCosts<V> seg(tour, options.mode);
  const auto order = tour.order();

  const std::size_t tile = std::min(options.tile_size, m);
  std::vector<BlockScratch<V>> scratch;
  try {
    scratch.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) scratch.emplace_back(states, record);
  } catch (const std::bad_alloc&) {
    throw ResourceError("out of memory allocating split scratch for " + std::to_string(workers) + " workers");
  }

  result.stats.tiles = (m + tile - 1) / tile;
  // One team for the whole call; every thread walks the tiles in step and
  // the blocks of each tile are shared out among them.
#pragma omp parallel num_threads(workers)
  for (std::size_t first = 0; first < m; first += tile) {
    const std::size_t count = std::min(tile, m - first);
    const std::size_t blocks = (count + kLanes - 1) / kLanes;
#pragma omp for schedule(dynamic, 4)
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(blocks); ++b) {
      const std::size_t lanes = std::min(kLanes, count - static_cast<std::size_t>(b) * kLanes);
      BlockScratch<V>& buf = scratch[static_cast<std::size_t>(omp_get_thread_num())];
      V* f = buf.f.get();
      std::int32_t* begin = buf.begin.get();
      std::int64_t* load = buf.load.get();
      std::int32_t* arg = buf.args.get();

      // Phase 1: tour-order prefix loads and windows.
      for (std::size_t lane = 0; lane < kLanes; ++lane) {
        std::int64_t* lcol = load + lane;
        lcol[0] = 0;
        if (lane >= lanes) {
          for (std::size_t i = 1; i < states; ++i) lcol[i * kLanes] = 0;
          continue;
        }
        const auto row = demands.row(first + static_cast<std::size_t>(b) * kLanes + lane);
        for (std::size_t k = 0; k < n; ++k) {
          lcol[(k + 1) * kLanes] = lcol[k * kLanes] + row[static_cast<std::size_t>(order[k]) - 1];
        }
      }
      fill_windows(seg, n, capacity, penalized, lanes, load, begin);

      // Phase 2: masked min-plus layers.
      if (penalized) {
        if (record) run_block<V, true, true>(seg, n, capacity, f, begin, load, arg);
        else run_block<V, true, false>(seg, n, capacity, f, begin, load, arg);
      } else {
        if (record) run_block<V, false, true>(seg, n, capacity, f, begin, load, arg);
        else run_block<V, false, false>(seg, n, capacity, f, begin, load, arg);
      }
      for (std::size_t lane = 0; lane < lanes; ++lane) {
        const std::size_t w = first + static_cast<std::size_t>(b) * kLanes + lane;
        result.cost[w] = detail::to_output(f[n * kLanes + lane]);
        if (record) {
          auto pred = result.predecessors.row(w);
          pred[0] = kNoPredecessor;
          for (std::size_t i = 1; i < states; ++i) pred[i] = arg[i * kLanes + lane];
        }
      }
    }
  }
}

}  // namespace

SplitBatchResult split_batch(const GiantTour& tour, DemandMatrixView demands,
                             std::int64_t capacity, const SplitOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  if (demands.cols() != tour.size()) {
    throw DataError("scenario set has " + std::to_string(demands.cols()) + " customers, tour has " +
                    std::to_string(tour.size()));
  }
  if (options.tile_size == 0) throw UsageError("tile size must be at least 1");
  if (options.mode.is_penalized() && !(options.mode.lambda >= 0.0)) {
    throw UsageError("penalty lambda must be nonnegative");
  }

  SplitBatchResult result;
  const int workers = resolve_workers(options.workers);
  result.stats.workers = workers;
  result.stats.integer_kernel = detail::use_integer_kernel(tour, options.mode);
  try {
    result.cost.assign(demands.rows(), kInfeasibleCost);
    if (options.record_predecessors) {
      result.predecessors = RowMatrix<std::int32_t>(demands.rows(), tour.size() + 1, kNoPredecessor);
    }
  } catch (const std::bad_alloc&) {
    throw ResourceError("out of memory allocating split results for " +
                        std::to_string(demands.rows()) + " scenarios");
  }
  if (demands.rows() > 0) {
    detail::dispatch_value_type(tour, options.mode, [&](auto v) {
      batch_impl<decltype(v)>(tour, demands, capacity, options, workers, result);
    });
  }
  result.stats.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace cvrpsd
