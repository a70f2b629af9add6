
import numpy as np
from flask import Blueprint, current_app, jsonify, request

from analog_chain import flag_names
from config import U64_MAX
from data_service import SWEEP_TARGETS, sweep_frame, sweep_rng
from energy_model import EnergyLedger, breakdown_frame, headline_figures
from mac_engine import KernelInput, MacJob, nominal_ledger, renormalize, run_mac


api = Blueprint('api', __name__, url_prefix='/api')


def _run_config():
    return current_app.config['RUN_CONFIG']


def _result_json(result, cfg):
    data = {
        'analog_volts': result.analog_volts,
        'adc_code': result.adc_code,
        'decoded_sum': result.decoded_sum,
        'adc_decoded_sum': result.adc_decoded_sum,
        'oracle_sum': result.oracle_sum,
        'abs_error_volts': result.abs_error_volts,
        'ideal_volts': result.ideal_volts,
        'ideal_code': result.ideal_code,
        'flags': flag_names(result.flags),
        'counts': [list(c) for c in result.counts],
    }
    if cfg.engine.renorm_enabled:
        data['next_activation'] = renormalize(result.adc_decoded_sum, cfg.engine).signed
    return data


@api.route('/mac', methods=['POST'])
def mac():
    """Run one MAC job given as signed activation/weight lists per feature map"""
    cfg = _run_config()
    data = request.get_json(silent=True)
    if not isinstance(data, dict) or not isinstance(data.get('maps'), list):
        return jsonify({'error': "body must be a JSON object with a 'maps' list"}), 400

    maps = []
    for index, entry in enumerate(data['maps']):
        if not isinstance(entry, dict) or 'activations' not in entry or 'weights' not in entry:
            return jsonify({'error': f'maps[{index}] needs activations and weights'}), 400
        try:
            maps.append(KernelInput.from_signed(entry['activations'], entry['weights'], cfg.engine.codec))
        except (TypeError, ValueError) as exc:
            return jsonify({'error': f'maps[{index}]: {exc}'}), 400

    seed = data.get('seed', cfg.seed)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= U64_MAX:
        return jsonify({'error': f'seed must be an unsigned 64-bit integer, got {seed!r}'}), 400
    rng = None if cfg.analog.is_ideal else np.random.default_rng(seed)
    ledger = EnergyLedger(cfg.energy)
    # engine errors fall through to the SimulatorError handler
    result = run_mac(MacJob(tuple(maps)), cfg.analog, cfg.engine, rng, ledger)
    response = _result_json(result, cfg)
    response['energy_fj'] = ledger.total_femtojoules
    return jsonify(response)


@api.route('/sweep/<target>', methods=['GET'])
def sweep(target):
    if target not in SWEEP_TARGETS:
        return jsonify({'error': f"unknown sweep target '{target}'", 'targets': list(SWEEP_TARGETS)}), 404
    cfg = _run_config()
    rng = sweep_rng(target, cfg)
    frame = sweep_frame(target, cfg, rng)
    return jsonify({'target': target, 'seed': cfg.seed, 'rows': frame.to_dict(orient='records')})


@api.route('/energy', methods=['GET'])
def energy():
    """Nominal energy breakdown and headline figures for one MAC job"""
    cfg = _run_config()
    ledger = nominal_ledger(cfg.energy, cfg.engine)
    mac_count = cfg.engine.feature_map_count
    figures = headline_figures(ledger, mac_count)
    return jsonify({
        'breakdown': breakdown_frame(ledger, mac_count).to_dict(orient='records'),
        'energy_per_mac_pj': figures.energy_per_mac_j * 1e12,
        'mac_rate_mhz': figures.mac_rate_hz / 1e6,
        'power_uw': figures.power_w * 1e6,
        'tops_per_w': figures.tops_per_w,
        'deviations': figures.deviations(),
    })


@api.route('/config', methods=['GET'])
def config():
    cfg = _run_config()
    return jsonify({'values': cfg.flattened(), 'provenance': cfg.provenance})
