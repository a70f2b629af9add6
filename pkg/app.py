import logging
import os

from flask import Flask, jsonify
from werkzeug.exceptions import HTTPException
from werkzeug.middleware.proxy_fix import ProxyFix

from config import load_config
from errors import SimulatorError

logger = logging.getLogger(__name__)


def create_app(config_path=None, run_config=None):
    """Flask app serving the simulator API over one loaded RunConfig"""
    app = Flask(__name__)
    app.wsgi_app = ProxyFix(app.wsgi_app, x_proto=1, x_host=1)

    if run_config is None:
        config_path = config_path or os.environ.get("SCMAC_CONFIG")
        logging.info(f"SCMAC_CONFIG: {config_path}")
        run_config = load_config(config_path)
    app.config["RUN_CONFIG"] = run_config

    from api_routes import api
    app.register_blueprint(api)

    @app.errorhandler(SimulatorError)
    def simulator_error(exc):
        logger.warning(f"rejected request: {exc}")
        return jsonify({'error': str(exc)}), 400

    @app.errorhandler(HTTPException)
    def http_error(exc):
        return jsonify({'error': exc.description}), exc.code

    return app
