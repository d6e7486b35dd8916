#pragma once

// Umbrella header for the library core (no HTTP dependency).

#include "gbc_chroma/colorspace.hpp"
#include "gbc_chroma/data_model.hpp"
#include "gbc_chroma/error.hpp"
#include "gbc_chroma/geometry.hpp"
#include "gbc_chroma/layout.hpp"
#include "gbc_chroma/matrix.hpp"
#include "gbc_chroma/pipeline.hpp"
#include "gbc_chroma/render.hpp"
#include "gbc_chroma/warp.hpp"
