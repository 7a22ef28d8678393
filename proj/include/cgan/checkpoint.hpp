#pragma once

#include <filesystem>
#include <span>

#include "cgan/trainer.hpp"

namespace cgan {

/// Text checkpoint starting with the line "CGAN1". Doubles are written in shortest
/// round-trip form, so save followed by load reproduces every parameter bit for bit.
/// The training trace is not stored; see write_trace_csv.
void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_checkpoint(const std::filesystem::path& path);

/// iteration, F_<arm>..., F_total, lr_generator, lr_discriminator
void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace);

}  // namespace cgan
