from cli.base import PipelineCommand, as_json
from cli.config import load_config
from cli.forms import GenerateForm
from cli.pipeline import RunConfig, run_generate


class Command(PipelineCommand):
    help = "Generate a synthetic driving-scene dataset (images, ground truth and VOC annotations)."
    form_class = GenerateForm

    def add_options(self, parser):
        parser.add_argument('--out', '-o', help="output root of the dataset tree")
        parser.add_argument('--map', help="OSM XML or layout JSON file; a synthetic grid city when omitted")
        parser.add_argument('--preset', help="scenario preset: PE01, PE02 or PE03")
        parser.add_argument('--scenario', help="JSON or YAML file of scenario fields")
        parser.add_argument('--seed', type=int)
        parser.add_argument('--frames', type=int, help="total frames over all sequences")
        parser.add_argument('--resolution', help="WIDTHxHEIGHT")
        parser.add_argument('--fov', type=float, help="horizontal field of view in degrees")
        parser.add_argument('--height', type=float, help="camera height above the ego car in meters")
        parser.add_argument('--weather')
        parser.add_argument('--time-of-day', type=float, dest='time_of_day')
        parser.add_argument('--sun-model', dest='sun_model')
        parser.add_argument('--blocks', type=int, help="synthetic city size in blocks per side")
        parser.add_argument('--no-culling', action='store_false', dest='culling', default=None)
        parser.add_argument('--jobs', type=int)
        parser.add_argument('--bands', type=int, help="horizontal bands rasterized in parallel")

    def clean_options(self, options):
        if isinstance(options.get('scenario'), str):
            options = {**options, 'scenario': load_config(options['scenario'])}
        return super().clean_options(options)

    def run(self, cleaned):
        return as_json(run_generate(RunConfig.from_form(cleaned)))
