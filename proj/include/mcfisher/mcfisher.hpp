#pragma once

#include "mcfisher/combined.hpp"
#include "mcfisher/ensembles.hpp"
#include "mcfisher/error.hpp"
#include "mcfisher/fisher.hpp"
#include "mcfisher/gaussian_fisher.hpp"
#include "mcfisher/linalg.hpp"
#include "mcfisher/parallel.hpp"
#include "mcfisher/pipeline.hpp"
#include "mcfisher/poisson_fisher.hpp"
#include "mcfisher/random.hpp"
#include "mcfisher/report.hpp"
#include "mcfisher/toymodels.hpp"
#include "mcfisher/version.hpp"
