#pragma once

#include "epimob/mobility/trajectory.hpp"

#include <filesystem>
#include <iosfwd>

namespace epimob::mobility {

// Raw observations as `uid,timestamp,lat,lon` CSV (the ingest format).
void write_raw_csv(std::ostream& out, const std::vector<RawTrajectory>& raws);

// Grid trajectories, one JSON object per line:
// {"uid": ..., "start": "<iso>", "step": 300, "cells": ["<hex>", ...]}
void write_grid_jsonl(std::ostream& out, const TrajectorySet& ts);
void write_grid_jsonl(const std::filesystem::path& path, const TrajectorySet& ts);

// Reads the JSONL form back; every line must share start, step and length.
TrajectorySet read_grid_jsonl(std::istream& in, int resolution);
TrajectorySet read_grid_jsonl(const std::filesystem::path& path, int resolution);

} // namespace epimob::mobility
