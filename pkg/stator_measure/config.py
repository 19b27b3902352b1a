import os

from dotenv import load_dotenv

# Optional overrides live in a .env file at the repository root
load_dotenv()


simulation_config = {

    "engine": {
        "max_qubits": 14, # hard cap on the dense register
        "prune_threshold": 1e-14, # branches below this probability are dropped
    },
    "tolerances": {
        "linear_algebra": 1e-12,
        "protocol": 1e-10,
        "psd": 1e-10,
        "closure": 1e-9, # residual angle / (pi/2) distance to an integer
    },
    "protocols": {
        "default_n_ebits": {
            "twisted-product": 1,
            "general-product": 2,
            "nonmax-equal": 2,
            "nonmax-bell": 3,
            "nonmax-general": 2,
            "twist-4x4": 3,
        },
    },
    "verify": {
        "random_inputs": 100,
        "direct_born_inputs": 2, # Born inputs also run through the protocol itself
        "seed": 20240601,
        "alpha_steps": 8,
        "n_max": 4,
        "general_product_alphas": [0.3, 1.0, "pi/2", "pi/8"],
        "nonmax_alpha": "pi/3",
        "nonmax_beta": "pi/7",
        "twist_angle": 0.4,
        "stator_samples": 100,
    },
    "graph": {
        "graph_recursion_limit": 30,
    }
}


enable_debug = {
    "DEBUG": os.getenv("STATOR_MEASURE_DEBUG", "").lower() in ("1", "true", "yes")
}
