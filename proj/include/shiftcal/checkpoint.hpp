#pragma once

#include <string>

#include "shiftcal/calibrator.hpp"
#include "shiftcal/discriminator.hpp"

namespace shiftcal {

// Model checkpoints are JSON documents holding layer shapes, activations and
// flat parameter arrays; load(save(x)) reproduces every double bit-exactly.
std::string forecaster_to_json(const Forecaster& forecaster);
Forecaster forecaster_from_json(const std::string& text);

std::string discriminator_to_json(const SourceDiscriminator& disc);
SourceDiscriminator discriminator_from_json(const std::string& text);

void save_forecaster(const Forecaster& forecaster, const std::string& path);
Forecaster load_forecaster(const std::string& path);
void save_discriminator(const SourceDiscriminator& disc, const std::string& path);
SourceDiscriminator load_discriminator(const std::string& path);

// write-temp-then-rename
void atomic_write(const std::string& path, const std::string& contents);

}  // namespace shiftcal
