from cli.base import PipelineCommand, as_json
from cli.forms import MixForm
from dataset.index import DatasetIndex
from dataset.surgery import mix


class Command(PipelineCommand):
    help = "Merge datasets into one; image ids are prefixed with a namespace per dataset."
    form_class = MixForm

    def add_options(self, parser):
        parser.add_argument('datasets', nargs='*')
        parser.add_argument('--out', '-o')
        parser.add_argument('--namespaces', help="comma separated, one per dataset")

    def clean_options(self, options):
        # nargs='*' yields [] when nothing was given on the command line
        if not options.get('datasets'):
            options = {**options, 'datasets': None}
        return super().clean_options(options)

    def run(self, cleaned):
        indexes = [DatasetIndex.load(path) for path in cleaned['datasets']]
        result = mix(*indexes, namespaces=cleaned.get('namespaces'))
        result.save(cleaned['out'])
        return as_json(result.to_dict())
